#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "mrn/ast_json.hpp"
#include "mrn/graph_build.hpp"
#include "mrn/graph_json.hpp"
#include "mrn/parser.hpp"
#include "mrn/vocab.hpp"

using namespace mrn;
using namespace mrn::graph;

namespace {

sol::NormalizedAst parse(const std::string& src) { return sol::parse_source({"t.sol", src}); }

Mrfg mrfg_of(const std::string& src, std::size_t fn_index = 0) {
    sol::NormalizedAst ast = parse(src);
    auto fns = sol::list_functions(ast);
    REQUIRE(fn_index < fns.size());
    return build_mrfg(fns[fn_index], ast);
}

int node_by_label(const Mrfg& g, const std::string& label, int nth = 0) {
    for (const GraphNode& n : g.nodes)
        if (n.label == label && nth-- == 0) return n.id;
    return -1;
}

std::vector<Edge> edges_of(const Mrfg& g, EdgeCategory cat, const std::string& subtype = "") {
    std::vector<Edge> out;
    for (const Edge& e : g.edges)
        if (e.type.category == cat && (subtype.empty() || e.type.subtype == subtype))
            out.push_back(e);
    return out;
}

const char* kSubtractionSource =
    "contract C { function sub(uint a, uint b) returns (uint) { uint s = a - b; return s; } }";

const char* kOverflowChainSource = R"(contract Math {
    function add(uint16 a, uint16 b) public returns (uint16) {
        uint16 c = a + b;
        return c;
    }
    function count() public returns (uint8) {
        uint8 total = add(250, 10);
        return total;
    }
})";

const char* kReentrancySource = R"(contract Victim {
    mapping(address => uint) balances;
    function deposit() public payable {
        balances[msg.sender] += msg.value;
    }
    function withdraw() public {
        uint amount = balances[msg.sender];
        msg.sender.call.value(amount)();
        balances[msg.sender] = 0;
    }
}
contract Attacker {
    Victim victim;
    function attack() public payable {
        victim.withdraw();
    }
    function() payable {
        victim.withdraw();
    }
})";

}  // namespace

TEST_CASE("prune removes the type node and keeps its text on the declaration") {
    sol::NormalizedAst ast = parse(kSubtractionSource);
    auto fns = sol::list_functions(ast);
    PrunedNode tree = prune_ast(fns[0], ast);
    REQUIRE(tree.children.size() >= 3);  // Parameters, s decl, return, ReturnParameters
    const PrunedNode* s_decl = nullptr;
    for (const PrunedNode& c : tree.children)
        if (c.kind == "VariableDeclaration" && c.text == "s") s_decl = &c;
    REQUIRE(s_decl != nullptr);
    CHECK(s_decl->decl_type == "uint");
    for (const PrunedNode& c : s_decl->children) CHECK(c.kind != "ElementaryTypeName");
}

TEST_CASE("prune splices ExpressionStatement wrappers") {
    sol::NormalizedAst ast = parse("contract C { function f(uint a) { a = a + 1; } }");
    auto fns = sol::list_functions(ast);
    PrunedNode tree = prune_ast(fns[0], ast);
    bool found_assignment_as_statement = false;
    for (const PrunedNode& c : tree.children)
        if (c.kind == "Assignment" && c.role == Role::Body) found_assignment_as_statement = true;
    CHECK(found_assignment_as_statement);
}

TEST_CASE("prune is a fixpoint on trees without droppable kinds") {
    // Hand-built AST: function with direct statement children and no
    // Block/ExpressionStatement/ElementaryTypeName nodes anywhere.
    std::string doc = R"({
  "format": "mrn-ast/1",
  "nodes": [
    {"id": 0, "kind": "SourceUnit", "text": null, "children": [1], "span": [1,1,1,1]},
    {"id": 1, "kind": "ContractDefinition", "text": "C", "children": [2], "span": [1,1,1,1]},
    {"id": 2, "kind": "FunctionDefinition", "text": "f", "children": [3,4,5], "span": [1,1,1,1]},
    {"id": 3, "kind": "Parameters", "text": null, "children": [], "span": [1,1,1,1]},
    {"id": 4, "kind": "ReturnParameters", "text": null, "children": [], "span": [1,1,1,1]},
    {"id": 5, "kind": "Return", "text": null, "children": [6], "span": [1,1,1,1]},
    {"id": 6, "kind": "Literal", "text": "1", "children": [], "span": [1,1,1,1]}
  ],
  "root": 0
})";
    sol::NormalizedAst ast = sol::ingest_ast_json(doc);
    auto fns = sol::list_functions(ast);
    REQUIRE(fns.size() == 1);
    PrunedNode tree = prune_ast(fns[0], ast);
    REQUIRE(tree.children.size() == 3);
    CHECK(tree.children[0].kind == "Parameters");
    CHECK(tree.children[1].kind == "ReturnParameters");
    CHECK(tree.children[2].kind == "Return");
    REQUIRE(tree.children[2].children.size() == 1);
    CHECK(tree.children[2].children[0].kind == "Literal");
}

TEST_CASE("subtraction function graph has the documented structure") {
    Mrfg g = mrfg_of(kSubtractionSource);

    int minus = node_by_label(g, "-");
    REQUIRE(minus >= 0);
    auto lefts = edges_of(g, EdgeCategory::Fields, "left");
    auto rights = edges_of(g, EdgeCategory::Fields, "right");
    REQUIRE(lefts.size() == 1);
    REQUIRE(rights.size() == 1);
    CHECK(lefts[0].src == minus);
    CHECK(rights[0].src == minus);
    CHECK(g.nodes[lefts[0].dst].label == "a");
    CHECK(g.nodes[rights[0].dst].label == "b");

    // DataType uint edges from Parameters to a and b
    int params = node_by_label(g, "parameters");
    auto dtypes = edges_of(g, EdgeCategory::DataType, "uint");
    int from_params = 0;
    for (const Edge& e : dtypes)
        if (e.src == params) ++from_params;
    CHECK(from_params == 2);

    // compute_from edges s -> {a-ref, b-ref, -}
    int s_decl = node_by_label(g, "s");
    auto cf = edges_of(g, EdgeCategory::DataFlow, "compute_from");
    REQUIRE(cf.size() == 3);
    std::set<std::string> targets;
    for (const Edge& e : cf) {
        CHECK(e.src == s_decl);
        targets.insert(g.nodes[e.dst].label);
    }
    CHECK(targets == std::set<std::string>{"-", "a", "b"});

    // sequential chain entry -> parameters -> s -> return -> return_parameters
    auto seq = edges_of(g, EdgeCategory::ControlInfo, "sequential");
    std::vector<int> indices;
    for (const Edge& e : seq) {
        REQUIRE(e.seq_index.has_value());
        indices.push_back(*e.seq_index);
    }
    std::sort(indices.begin(), indices.end());
    REQUIRE(indices.size() == 4);  // k=2 statements => seq 0..3
    for (std::size_t i = 0; i < indices.size(); ++i) CHECK(indices[i] == static_cast<int>(i));
    CHECK(g.nodes[seq[0].src].label == "entry");
}

TEST_CASE("exactly one entry node and gapless chain also on an empty body") {
    Mrfg g = mrfg_of("contract C { function f() { } }");
    REQUIRE(g.nodes.size() == 3);
    CHECK(g.nodes[0].label == "entry");
    CHECK(g.nodes[1].label == "parameters");
    CHECK(g.nodes[2].label == "return_parameters");
    auto seq = edges_of(g, EdgeCategory::ControlInfo, "sequential");
    REQUIRE(seq.size() == 2);
    CHECK(*seq[0].seq_index == 0);
    CHECK(*seq[1].seq_index == 1);
    auto selfs = edges_of(g, EdgeCategory::SelfLoop);
    CHECK(selfs.size() == g.nodes.size());
}

TEST_CASE("return references resolve to the local declaration") {
    Mrfg g = mrfg_of(kSubtractionSource);
    int s_decl = node_by_label(g, "s");        // declaration statement node
    int s_ref = node_by_label(g, "s", 1);      // the reference in `return s`
    REQUIRE(s_decl >= 0);
    REQUIRE(s_ref >= 0);
    auto vf = edges_of(g, EdgeCategory::DataFlow, "value_from");
    bool found = false;
    for (const Edge& e : vf)
        if (e.src == s_ref && e.dst == s_decl) found = true;
    CHECK(found);
}

TEST_CASE("unresolvable names get no value_from edge") {
    Mrfg g = mrfg_of("contract C { function f() { oracle(); } }");
    CHECK(edges_of(g, EdgeCategory::DataFlow, "value_from").empty());
}

TEST_CASE("parameter references resolve into the parameter subtree") {
    Mrfg g = mrfg_of("contract C { function f(uint a) returns (uint) { return a; } }");
    auto vf = edges_of(g, EdgeCategory::DataFlow, "value_from");
    REQUIRE(vf.size() == 1);
    int a_decl = node_by_label(g, "a");
    CHECK(vf[0].dst == a_decl);
}

TEST_CASE("state variable references materialize a declaration node") {
    Mrfg g = mrfg_of(R"(contract C {
        uint total;
        function bump(uint x) { total = total + x; }
    })");
    int state = node_by_label(g, "total", 1);  // lhs ref is first, state node appended last
    auto vf = edges_of(g, EdgeCategory::DataFlow, "value_from");
    REQUIRE(vf.size() >= 2);  // lhs total, rhs total, x
    // the state node has a DataType self edge carrying its declared type
    bool typed_self = false;
    for (const Edge& e : edges_of(g, EdgeCategory::DataType, "uint"))
        if (e.src == e.dst && g.nodes[e.src].label == "total") typed_self = true;
    CHECK(typed_self);
    CHECK(state >= 0);
}

TEST_CASE("fallback edge from a call.value site targets entry exactly once") {
    sol::NormalizedAst ast = parse(kReentrancySource);
    auto fns = sol::list_functions(ast);
    REQUIRE(fns[1].name == "withdraw");
    Mrfg g = build_mrfg(fns[1], ast);
    auto fb = edges_of(g, EdgeCategory::Fallback);
    REQUIRE(fb.size() == 1);
    CHECK(fb[0].dst == 0);
    CHECK(g.nodes[fb[0].dst].label == "entry");
}

TEST_CASE("functions without currency transfers have no fallback edges") {
    Mrfg g = mrfg_of(kSubtractionSource);
    CHECK(edges_of(g, EdgeCategory::Fallback).empty());
}

TEST_CASE("each transfer site contributes its own fallback edge") {
    Mrfg g = mrfg_of(R"(contract C {
        function pay(address a, address b) {
            a.transfer(1);
            b.transfer(2);
        }
    })");
    auto fb = edges_of(g, EdgeCategory::Fallback);
    REQUIRE(fb.size() == 2);
    CHECK(fb[0].dst == 0);
    CHECK(fb[1].dst == 0);
    CHECK(fb[0].src != fb[1].src);
}

TEST_CASE("send also triggers the fallback edge, bare call does not") {
    Mrfg g = mrfg_of("contract C { function f(address a) { a.send(3); a.call(); } }");
    CHECK(edges_of(g, EdgeCategory::Fallback).size() == 1);
}

TEST_CASE("local declarations carry their type as a self edge") {
    Mrfg g = mrfg_of(kOverflowChainSource, 1);  // count(): uint8 total = add(250, 10);
    bool found = false;
    for (const Edge& e : edges_of(g, EdgeCategory::DataType, "uint8"))
        if (e.src == e.dst && g.nodes[e.src].label == "total") found = true;
    CHECK(found);
}

TEST_CASE("control statements add control edges to condition and body heads") {
    Mrfg g = mrfg_of(R"(contract C {
        function f(uint a) returns (uint) {
            if (a > 1) { a = a - 1; a = a * 2; } else { a = 0; }
            while (a > 0) { a = a - 1; }
            for (uint i = 0; i < 3; i += 1) { a = a + i; }
            require(a > 0);
            return a;
        }
    })");
    auto ifs = edges_of(g, EdgeCategory::ControlInfo, "if");
    CHECK(ifs.size() == 2);  // condition + then head
    CHECK(edges_of(g, EdgeCategory::ControlInfo, "else").size() == 1);
    CHECK(edges_of(g, EdgeCategory::ControlInfo, "while").size() == 2);
    CHECK(edges_of(g, EdgeCategory::ControlInfo, "for").size() == 4);
    CHECK(edges_of(g, EdgeCategory::ControlInfo, "require").size() == 1);
    // nested statements chain with unindexed sequential edges
    auto seq = edges_of(g, EdgeCategory::ControlInfo, "sequential");
    int unindexed = 0;
    for (const Edge& e : seq)
        if (!e.seq_index) ++unindexed;
    CHECK(unindexed == 1);  // the two-statement then-branch
    // every control condition also carries a Fields/condition edge
    CHECK(edges_of(g, EdgeCategory::Fields, "condition").size() == 4);
}

TEST_CASE("call graph of the overflow chain is exactly count -> add") {
    sol::NormalizedAst ast = parse(kOverflowChainSource);
    auto calls = extract_call_edges(ast);
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].first == 1);
    CHECK(calls[0].second == 0);
}

TEST_CASE("self recursion produces a self edge") {
    sol::NormalizedAst ast = parse("contract C { function f() { f(); } }");
    auto calls = extract_call_edges(ast);
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].first == 0);
    CHECK(calls[0].second == 0);
}

TEST_CASE("calls to undefined callees yield no edge") {
    sol::NormalizedAst ast =
        parse("contract C { function f(address erc20) { erc20.transferFrom(1, 2); g(); } }");
    CHECK(extract_call_edges(ast).empty());
}

TEST_CASE("arity breaks ties, unique name wins without arity match") {
    sol::NormalizedAst ast = parse(R"(contract C {
        function f(uint a) { }
        function f(uint a, uint b) { }
        function g() { f(1, 2); }
        function h() { f(1, 2, 3); }
    })");
    auto calls = extract_call_edges(ast);
    REQUIRE(calls.size() == 1);  // g -> f/2; h unresolved (two candidates, no arity match)
    CHECK(calls[0].first == 2);
    CHECK(calls[0].second == 1);
}

TEST_CASE("member calls resolve through contract-typed variables") {
    sol::NormalizedAst ast = parse(kReentrancySource);
    auto fns = sol::list_functions(ast);
    REQUIRE(fns.size() == 4);  // deposit, withdraw, attack, fallback
    auto calls = extract_call_edges(ast);
    REQUIRE(calls.size() == 2);
    CHECK(calls[0] == std::make_pair(std::size_t{2}, std::size_t{1}));  // attack -> withdraw
    CHECK(calls[1] == std::make_pair(std::size_t{3}, std::size_t{1}));  // fallback -> withdraw
}

TEST_CASE("build_mrng assembles functions and deduplicated calls") {
    sol::NormalizedAst ast = parse(kOverflowChainSource);
    Mrng g = build_mrng(ast);
    REQUIRE(g.functions.size() == 2);
    REQUIRE(g.calls.size() == 1);
    CHECK(g.calls[0] == std::make_pair(1, 0));

    Mrng single = build_mrng(parse("contract C { function f() { } }"));
    CHECK(single.functions.size() == 1);
    CHECK(single.calls.empty());
}

TEST_CASE("mrfg construction is deterministic") {
    Mrfg a = mrfg_of(kReentrancySource, 1);
    Mrfg b = mrfg_of(kReentrancySource, 1);
    REQUIRE(a.nodes.size() == b.nodes.size());
    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
        CHECK(a.edges[i].src == b.edges[i].src);
        CHECK(a.edges[i].dst == b.edges[i].dst);
        CHECK(a.edges[i].type.subtype == b.edges[i].type.subtype);
    }
}

TEST_CASE("every mrfg in a corpus keeps the core invariants") {
    for (const char* src : {kSubtractionSource, kOverflowChainSource, kReentrancySource}) {
        Mrng g = build_mrng(parse(src));
        for (const Mrfg& f : g.functions) {
            int entries = 0;
            for (const GraphNode& n : f.nodes)
                if (n.label == "entry") ++entries;
            CHECK(entries == 1);
            std::vector<int> seq;
            for (const Edge& e : f.edges) {
                CHECK(e.src >= 0);
                CHECK(e.src < static_cast<int>(f.nodes.size()));
                CHECK(e.dst >= 0);
                CHECK(e.dst < static_cast<int>(f.nodes.size()));
                if (e.type.subtype == "sequential" && e.seq_index) seq.push_back(*e.seq_index);
                if (e.type.category == EdgeCategory::Fallback) CHECK(e.dst == 0);
            }
            std::sort(seq.begin(), seq.end());
            for (std::size_t i = 0; i < seq.size(); ++i) CHECK(seq[i] == static_cast<int>(i));
        }
        // every call edge is backed by a FunctionCall node in the caller
        for (auto [caller, callee] : g.calls) {
            bool has_call_node = false;
            for (const GraphNode& n : g.functions[caller].nodes)
                if (n.label == "call") has_call_node = true;
            CHECK(has_call_node);
        }
    }
}

TEST_CASE("vocabulary keeps structural tokens and thresholds rare ones") {
    std::vector<Mrng> corpus;
    corpus.push_back(build_mrng(parse(kSubtractionSource)));
    corpus.push_back(build_mrng(parse(kOverflowChainSource)));

    Vocabulary v1 = build_vocabulary(corpus, 1);
    CHECK(v1.node_id("entry") >= 2);
    CHECK(v1.node_tokens.at(kUnkToken) == 0);
    CHECK(v1.node_tokens.at(kPadToken) == 1);

    // the literal `250` appears once in the corpus; with min_frequency=2 it maps to UNK
    CHECK(v1.node_id("250") >= 2);
    Vocabulary v2 = build_vocabulary(corpus, 2);
    CHECK(v2.node_id("250") == 0);
    CHECK(v2.node_id("entry") >= 2);

    Vocabulary v1b = build_vocabulary(corpus, 1);
    CHECK(v1.node_tokens == v1b.node_tokens);
    CHECK(v1.edge_subtypes == v1b.edge_subtypes);

    CHECK(v1.edge_subtypes.at(kUnkEdgeToken) == 0);
    CHECK(v1.edge_id("sequential") > 0);
    CHECK(v1.edge_id("uint8") != v1.edge_id("uint16"));

    CHECK_THROWS_AS(build_vocabulary({}, 1), EmptyCorpus);
}

TEST_CASE("graph serialization round-trips") {
    for (const char* src : {kSubtractionSource, kOverflowChainSource, kReentrancySource}) {
        Mrng g = build_mrng(parse(src));
        std::string bytes = serialize_graph(g);
        Mrng back = deserialize_graph(bytes);
        CHECK(serialize_graph(back) == bytes);
    }
}

TEST_CASE("truncated graph bytes raise FormatError") {
    std::string bytes = serialize_graph(build_mrng(parse(kSubtractionSource)));
    CHECK_THROWS_AS(deserialize_graph(bytes.substr(0, bytes.size() / 2)), FormatError);
}

TEST_CASE("unknown closed-category subtype maps to UNK_EDGE with a warning") {
    std::string doc = R"({
  "format": "mrn-graph/1",
  "contract": "x.sol",
  "functions": [
    {"name": "f", "arity": 0,
     "nodes": [{"id": 0, "label": "entry"}],
     "edges": [{"src": 0, "dst": 0, "category": "Fields", "subtype": "mystery", "seq": null}]}
  ],
  "calls": []
})";
    std::vector<std::string> warnings;
    Mrng g = deserialize_graph(doc, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(g.functions[0].edges[0].type.subtype == "<unk_edge>");
    // DataType subtypes stay open: a user-defined type round-trips untouched
    std::string doc2 = R"({
  "format": "mrn-graph/1",
  "contract": "x.sol",
  "functions": [
    {"name": "f", "arity": 0,
     "nodes": [{"id": 0, "label": "entry"}],
     "edges": [{"src": 0, "dst": 0, "category": "DataType", "subtype": "Victim", "seq": null}]}
  ],
  "calls": []
})";
    warnings.clear();
    Mrng g2 = deserialize_graph(doc2, &warnings);
    CHECK(warnings.empty());
    CHECK(g2.functions[0].edges[0].type.subtype == "Victim");
}

TEST_CASE("dot export labels field edges and clusters functions") {
    Mrfg f = mrfg_of(kSubtractionSource);
    std::string dot = to_dot(f);
    CHECK(dot.find("label=\"left\"") != std::string::npos);
    CHECK(dot.find("label=\"right\"") != std::string::npos);

    Mrfg empty = mrfg_of("contract C { function f() { } }");
    std::string dot_empty = to_dot(empty);
    CHECK(dot_empty.find("n0 -> n1") != std::string::npos);
    CHECK(dot_empty.find("n1 -> n2") != std::string::npos);

    Mrng g = build_mrng(parse(kOverflowChainSource));
    std::string dot_mrng = to_dot(g);
    CHECK(dot_mrng.find("subgraph cluster_f0") != std::string::npos);
    CHECK(dot_mrng.find("subgraph cluster_f1") != std::string::npos);
    CHECK(dot_mrng.find("f1_n0 -> f0_n0") != std::string::npos);
}
