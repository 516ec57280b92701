#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mrn/ast.hpp"
#include "mrn/graph.hpp"

namespace mrn::graph {

/// Structural position of a pruned node relative to its parent. Wrappers
/// splice their children through with the wrapper's own role, so e.g. the
/// statements of an else-branch Block all carry Else.
enum class Role {
    None, Param, ReturnParam, Body, Then, Else, Condition, Init, Update,
    Left, Right, Operation, Callee, Argument, Member, Index,
};

/// Vulnerability-ready copy of a function subtree: attribute wrappers and
/// type-name nodes are gone, declared types live on the declaring node.
struct PrunedNode {
    int ast_id = -1;
    std::string kind;
    std::string text;
    std::string decl_type;  // VariableDeclaration only
    Role role = Role::None;
    std::vector<PrunedNode> children;

    // assigned by build_mrfg when the node is materialized
    int graph_id = -1;
};

namespace detail {

inline bool splices(const std::string& kind) {
    return kind == "Block" || kind == "ExpressionStatement" || kind == "TypeName";
}

inline std::vector<Role> child_roles(const sol::NormalizedAst& ast, const sol::AstNode& node) {
    std::size_t n = node.children.size();
    std::vector<Role> roles(n, Role::None);
    auto set = [&](std::size_t i, Role r) {
        if (i < n) roles[i] = r;
    };
    if (node.kind == "FunctionDefinition") {
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& k = ast.node(node.children[i]).kind;
            roles[i] = k == "Parameters" ? Role::Param
                     : k == "ReturnParameters" ? Role::ReturnParam
                                               : Role::Body;
        }
    } else if (node.kind == "Parameters") {
        std::fill(roles.begin(), roles.end(), Role::Param);
    } else if (node.kind == "ReturnParameters") {
        std::fill(roles.begin(), roles.end(), Role::ReturnParam);
    } else if (node.kind == "VariableDeclaration") {
        std::fill(roles.begin(), roles.end(), Role::Operation);
    } else if (node.kind == "Assignment" || node.kind == "BinaryOperation") {
        set(0, Role::Left);
        set(1, Role::Right);
    } else if (node.kind == "UnaryOperation") {
        set(0, Role::Operation);
    } else if (node.kind == "IfStatement") {
        set(0, Role::Condition);
        set(1, Role::Then);
        set(2, Role::Else);
    } else if (node.kind == "WhileStatement") {
        set(0, Role::Condition);
        for (std::size_t i = 1; i < n; ++i) roles[i] = Role::Body;
    } else if (node.kind == "ForStatement") {
        if (n == 4) {
            roles = {Role::Init, Role::Condition, Role::Update, Role::Body};
        } else {
            set(0, Role::Condition);
            for (std::size_t i = 1; i < n; ++i) roles[i] = Role::Body;
        }
    } else if (node.kind == "Return") {
        set(0, Role::Operation);
    } else if (node.kind == "Require") {
        set(0, Role::Condition);
        for (std::size_t i = 1; i < n; ++i) roles[i] = Role::Argument;
    } else if (node.kind == "FunctionCall") {
        set(0, Role::Callee);
        for (std::size_t i = 1; i < n; ++i) roles[i] = Role::Argument;
    } else if (node.kind == "MemberAccess") {
        set(0, Role::Member);
    } else if (node.kind == "IndexAccess") {
        set(0, Role::Member);
        set(1, Role::Index);
    }
    return roles;
}

inline void append_pruned(const sol::NormalizedAst& ast, int id, Role role, PrunedNode& parent);

inline PrunedNode prune_node(const sol::NormalizedAst& ast, int id, Role role) {
    const sol::AstNode& node = ast.node(id);
    PrunedNode p;
    p.ast_id = node.id;
    p.kind = node.kind;
    p.text = node.text;
    p.role = role;
    std::vector<Role> roles = child_roles(ast, node);
    for (std::size_t i = 0; i < node.children.size(); ++i)
        append_pruned(ast, node.children[i], roles[i], p);
    return p;
}

inline void append_pruned(const sol::NormalizedAst& ast, int id, Role role, PrunedNode& parent) {
    const sol::AstNode& node = ast.node(id);
    if (node.kind == "ElementaryTypeName") {
        if (parent.kind == "VariableDeclaration") parent.decl_type = node.text;
        return;  // description leaf, dropped
    }
    if (splices(node.kind)) {
        for (int child : node.children) append_pruned(ast, child, role, parent);
        return;
    }
    parent.children.push_back(prune_node(ast, id, role));
}

}  // namespace detail

/// Drops attribute/flag/description elements from the function subtree:
/// Block and ExpressionStatement wrappers splice their children to the
/// parent, ElementaryTypeName leaves vanish with their text preserved as
/// decl_type on the declaring VariableDeclaration.
inline PrunedNode prune_ast(const sol::FunctionAst& fn, const sol::NormalizedAst& ast) {
    return detail::prune_node(ast, fn.root, Role::None);
}

namespace detail {

inline std::string node_label(const PrunedNode& n) {
    if (!n.text.empty()) return n.text;
    if (n.kind == "Parameters") return "parameters";
    if (n.kind == "ReturnParameters") return "return_parameters";
    if (n.kind == "IfStatement") return "if";
    if (n.kind == "WhileStatement") return "while";
    if (n.kind == "ForStatement") return "for";
    if (n.kind == "Return") return "return";
    if (n.kind == "Require") return "require";
    if (n.kind == "FunctionCall") return "call";
    if (n.kind == "IndexAccess") return "index";
    if (n.kind == "VariableDeclaration") return "var";
    if (n.kind == "Unsupported") return "unsupported";
    if (n.kind == "MemberAccess") return "member";
    if (n.kind == "Literal") return "literal";
    return "unsupported";
}

/// State variable declarations of the contract enclosing `fn_root`:
/// name -> declared type text.
inline std::map<std::string, std::string> state_variables(const sol::NormalizedAst& ast,
                                                          int fn_root) {
    std::map<std::string, std::string> out;
    for (int c : ast.node(ast.root).children) {
        const sol::AstNode& contract = ast.node(c);
        if (contract.kind != "ContractDefinition") continue;
        bool owns = false;
        for (int member : contract.children)
            if (member == fn_root) owns = true;
        if (!owns) continue;
        for (int member : contract.children) {
            const sol::AstNode& m = ast.node(member);
            if (m.kind != "VariableDeclaration" || m.text.empty()) continue;
            std::string type;
            for (int tc : m.children)
                if (ast.node(tc).kind == "ElementaryTypeName") type = ast.node(tc).text;
            out.emplace(m.text, type);
        }
    }
    return out;
}

class MrfgBuilder {
public:
    MrfgBuilder(const sol::FunctionAst& fn, const sol::NormalizedAst& ast)
        : fn_(fn), ast_(ast), tree_(prune_ast(fn, ast)) {}

    Mrfg build() {
        Mrfg g;
        g.function_name = fn_.name;
        g.arity = fn_.arity;

        collect_parts();
        add_node("entry");
        if (params_) number_subtree(*params_);
        for (PrunedNode* stmt : statements_) number_subtree(*stmt);
        if (returns_) number_subtree(*returns_);
        resolve_scopes();

        add_sequential_edges();
        add_data_type_edges();
        add_fields_edges(tree_);
        add_control_edges(tree_);
        add_dataflow_edges(tree_);
        add_fallback_edges(tree_);
        for (const GraphNode& n : nodes_)
            push_edge(n.id, n.id, EdgeCategory::SelfLoop, "self");

        g.nodes = std::move(nodes_);
        g.edges = std::move(edges_);
        return g;
    }

private:
    const sol::FunctionAst& fn_;
    const sol::NormalizedAst& ast_;
    PrunedNode tree_;
    PrunedNode* params_ = nullptr;
    PrunedNode* returns_ = nullptr;
    std::vector<PrunedNode*> statements_;

    std::vector<GraphNode> nodes_;
    std::vector<Edge> edges_;

    std::map<std::string, int> param_scope_;
    std::map<std::string, int> local_scope_;
    std::map<std::string, std::string> state_types_;
    std::map<std::string, int> state_nodes_;  // materialized on first reference

    int add_node(const std::string& label) {
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back({id, label});
        return id;
    }

    void push_edge(int src, int dst, EdgeCategory cat, std::string subtype,
                   std::optional<int> seq = std::nullopt) {
        edges_.push_back({src, dst, {cat, std::move(subtype)}, seq});
    }

    void collect_parts() {
        for (PrunedNode& c : tree_.children) {
            if (c.kind == "Parameters" && !params_)
                params_ = &c;
            else if (c.kind == "ReturnParameters" && !returns_)
                returns_ = &c;
            else
                statements_.push_back(&c);
        }
    }

    void number_subtree(PrunedNode& n) {
        n.graph_id = add_node(node_label(n));
        for (PrunedNode& c : n.children) number_subtree(c);
    }

    void resolve_scopes() {
        if (params_)
            for (const PrunedNode& p : params_->children)
                if (p.kind == "VariableDeclaration" && !p.text.empty())
                    param_scope_.emplace(p.text, p.graph_id);
        if (returns_)
            for (const PrunedNode& p : returns_->children)
                if (p.kind == "VariableDeclaration" && !p.text.empty())
                    param_scope_.emplace(p.text, p.graph_id);
        collect_locals(tree_, /*top=*/true);
        state_types_ = state_variables(ast_, fn_.root);
    }

    void collect_locals(const PrunedNode& n, bool top) {
        if (!top && n.kind == "VariableDeclaration" && !n.text.empty())
            local_scope_.emplace(n.text, n.graph_id);
        for (const PrunedNode& c : n.children) {
            if (top && (c.kind == "Parameters" || c.kind == "ReturnParameters")) continue;
            collect_locals(c, false);
        }
    }

    /// entry -> Parameters -> statement_1 .. statement_k -> ReturnParameters
    /// carries seq_index 0..k+1; statement chains inside control bodies are
    /// linked with unindexed sequential edges.
    void add_sequential_edges() {
        std::vector<int> chain;
        chain.push_back(0);  // entry
        if (params_) chain.push_back(params_->graph_id);
        for (PrunedNode* s : statements_) chain.push_back(s->graph_id);
        if (returns_) chain.push_back(returns_->graph_id);
        for (std::size_t i = 0; i + 1 < chain.size(); ++i)
            push_edge(chain[i], chain[i + 1], EdgeCategory::ControlInfo, "sequential",
                      static_cast<int>(i));
        add_nested_chains(tree_, /*top=*/true);
    }

    void add_nested_chains(const PrunedNode& n, bool top) {
        if (!top) {
            chain_group(n, Role::Then);
            chain_group(n, Role::Else);
            chain_group(n, Role::Body);
        }
        for (const PrunedNode& c : n.children) add_nested_chains(c, false);
    }

    void chain_group(const PrunedNode& parent, Role role) {
        const PrunedNode* prev = nullptr;
        for (const PrunedNode& c : parent.children) {
            if (c.role != role) continue;
            if (prev)
                push_edge(prev->graph_id, c.graph_id, EdgeCategory::ControlInfo, "sequential");
            prev = &c;
        }
    }

    void add_data_type_edges() {
        auto declared = [&](const PrunedNode* list) {
            if (!list) return;
            for (const PrunedNode& p : list->children)
                if (p.kind == "VariableDeclaration" && !p.decl_type.empty())
                    push_edge(list->graph_id, p.graph_id, EdgeCategory::DataType, p.decl_type);
        };
        declared(params_);
        declared(returns_);
        add_local_type_edges(tree_, /*top=*/true);
    }

    void add_local_type_edges(const PrunedNode& n, bool top) {
        if (!top && n.kind == "VariableDeclaration" && n.role != Role::Param &&
            n.role != Role::ReturnParam && !n.decl_type.empty())
            push_edge(n.graph_id, n.graph_id, EdgeCategory::DataType, n.decl_type);
        for (const PrunedNode& c : n.children) {
            if (top && (c.kind == "Parameters" || c.kind == "ReturnParameters")) continue;
            add_local_type_edges(c, false);
        }
    }

    void add_fields_edges(const PrunedNode& n) {
        for (const PrunedNode& c : n.children) {
            const char* subtype = nullptr;
            switch (c.role) {
                case Role::Left: subtype = "left"; break;
                case Role::Right: subtype = "right"; break;
                case Role::Operation: subtype = "operation"; break;
                case Role::Callee: subtype = "function_call"; break;
                case Role::Argument: subtype = "argument"; break;
                case Role::Member: subtype = "member"; break;
                case Role::Index: subtype = "index"; break;
                case Role::Condition: subtype = "condition"; break;
                default: break;
            }
            if (subtype && n.graph_id >= 0)
                push_edge(n.graph_id, c.graph_id, EdgeCategory::Fields, subtype);
            add_fields_edges(c);
        }
    }

    const PrunedNode* first_with_role(const PrunedNode& n, Role role) const {
        for (const PrunedNode& c : n.children)
            if (c.role == role) return &c;
        return nullptr;
    }

    void add_control_edges(const PrunedNode& n) {
        auto emit = [&](const PrunedNode* target, const char* subtype) {
            if (target)
                push_edge(n.graph_id, target->graph_id, EdgeCategory::ControlInfo, subtype);
        };
        if (n.kind == "IfStatement") {
            emit(first_with_role(n, Role::Condition), "if");
            emit(first_with_role(n, Role::Then), "if");
            emit(first_with_role(n, Role::Else), "else");
        } else if (n.kind == "WhileStatement") {
            emit(first_with_role(n, Role::Condition), "while");
            emit(first_with_role(n, Role::Body), "while");
        } else if (n.kind == "ForStatement") {
            emit(first_with_role(n, Role::Init), "for");
            emit(first_with_role(n, Role::Condition), "for");
            emit(first_with_role(n, Role::Update), "for");
            emit(first_with_role(n, Role::Body), "for");
        } else if (n.kind == "Require") {
            emit(first_with_role(n, Role::Condition), "require");
        }
        for (const PrunedNode& c : n.children) add_control_edges(c);
    }

    int resolve_reference(const std::string& name) {
        if (auto it = param_scope_.find(name); it != param_scope_.end()) return it->second;
        if (auto it = local_scope_.find(name); it != local_scope_.end()) return it->second;
        if (auto it = state_nodes_.find(name); it != state_nodes_.end()) return it->second;
        if (auto it = state_types_.find(name); it != state_types_.end()) {
            int id = add_node(name);
            state_nodes_.emplace(name, id);
            if (!it->second.empty())
                push_edge(id, id, EdgeCategory::DataType, it->second);
            return id;
        }
        return -1;
    }

    void collect_subtree_ids(const PrunedNode& n, std::vector<int>& out) const {
        out.push_back(n.graph_id);
        for (const PrunedNode& c : n.children) collect_subtree_ids(c, out);
    }

    /// compute_from: assigned variable -> every node of the assigned
    /// expression. value_from: identifier reference -> its declaration
    /// (parameter, then local, then state variable; unresolved names get
    /// no edge).
    void add_dataflow_edges(const PrunedNode& n) {
        if (n.kind == "Assignment" && n.children.size() >= 2) {
            const PrunedNode* lhs = first_with_role(n, Role::Left);
            const PrunedNode* rhs = first_with_role(n, Role::Right);
            if (lhs && rhs) emit_compute_from(lhs->graph_id, *rhs);
        } else if (n.kind == "VariableDeclaration" && n.role != Role::Param &&
                   n.role != Role::ReturnParam) {
            if (const PrunedNode* init = first_with_role(n, Role::Operation))
                emit_compute_from(n.graph_id, *init);
        } else if (n.kind == "Identifier") {
            int decl = resolve_reference(n.text);
            if (decl >= 0)
                push_edge(n.graph_id, decl, EdgeCategory::DataFlow, "value_from");
        }
        for (const PrunedNode& c : n.children) add_dataflow_edges(c);
    }

    void emit_compute_from(int src, const PrunedNode& expr) {
        std::vector<int> targets;
        collect_subtree_ids(expr, targets);
        for (int t : targets) push_edge(src, t, EdgeCategory::DataFlow, "compute_from");
    }

    /// Calls that transfer currency can hand control to the callee's
    /// fallback function, which may re-enter; the edge points back at entry.
    bool is_transfer_call(const PrunedNode& call) const {
        if (call.kind != "FunctionCall" || call.children.empty()) return false;
        const PrunedNode& callee = call.children.front();
        if (callee.kind != "MemberAccess") return false;
        if (callee.text == "transfer" || callee.text == "send") return true;
        if (callee.text == "value" && !callee.children.empty() &&
            callee.children.front().kind == "MemberAccess" &&
            callee.children.front().text == "call")
            return true;
        return false;
    }

    void add_fallback_edges(const PrunedNode& n) {
        if (is_transfer_call(n))
            push_edge(n.graph_id, 0, EdgeCategory::Fallback, "fallback");
        for (const PrunedNode& c : n.children) add_fallback_edges(c);
    }
};

}  // namespace detail

/// Builds the multi-relational function graph of one function.
inline Mrfg build_mrfg(const sol::FunctionAst& fn, const sol::NormalizedAst& ast) {
    return detail::MrfgBuilder(fn, ast).build();
}

namespace detail {

struct FunctionRef {
    std::string name;
    int arity = 0;
    std::string contract;
    std::size_t index = 0;
};

class CallExtractor {
public:
    explicit CallExtractor(const sol::NormalizedAst& ast) : ast_(ast) {
        auto fns = sol::list_functions(ast);
        for (std::size_t i = 0; i < fns.size(); ++i) {
            FunctionRef ref{fns[i].name, fns[i].arity, sol::enclosing_contract(ast, fns[i].root), i};
            functions_.push_back(ref);
            roots_.push_back(fns[i].root);
        }
        for (int c : ast.node(ast.root).children)
            if (ast.node(c).kind == "ContractDefinition")
                contract_names_.insert(ast.node(c).text);
    }

    std::vector<std::pair<std::size_t, std::size_t>> extract() {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t i = 0; i < functions_.size(); ++i) {
            caller_ = i;
            var_types_ = caller_variable_types(i);
            std::vector<std::pair<std::size_t, std::size_t>> found;
            walk_calls(roots_[i], found);
            for (auto e : found)
                if (seen.insert(e).second) out.push_back(e);
        }
        return out;
    }

private:
    const sol::NormalizedAst& ast_;
    std::vector<FunctionRef> functions_;
    std::vector<int> roots_;
    std::set<std::string> contract_names_;
    std::size_t caller_ = 0;
    std::map<std::string, std::string> var_types_;

    /// Declared types of names visible inside function i: parameters,
    /// locals, then the contract's state variables.
    std::map<std::string, std::string> caller_variable_types(std::size_t i) const {
        std::map<std::string, std::string> types = state_variables(ast_, roots_[i]);
        collect_decl_types(roots_[i], types);
        return types;
    }

    void collect_decl_types(int id, std::map<std::string, std::string>& types) const {
        const sol::AstNode& n = ast_.node(id);
        if (n.kind == "VariableDeclaration" && !n.text.empty()) {
            for (int c : n.children)
                if (ast_.node(c).kind == "ElementaryTypeName")
                    types[n.text] = ast_.node(c).text;
        }
        for (int c : n.children) collect_decl_types(c, types);
    }

    void walk_calls(int id, std::vector<std::pair<std::size_t, std::size_t>>& out) const {
        const sol::AstNode& n = ast_.node(id);
        if (n.kind == "FunctionCall" && !n.children.empty()) {
            int call_arity = static_cast<int>(n.children.size()) - 1;
            const sol::AstNode& callee = ast_.node(n.children.front());
            if (callee.kind == "Identifier") {
                if (auto b = resolve(callee.text, functions_[caller_].contract, call_arity))
                    out.push_back({caller_, *b});
            } else if (callee.kind == "MemberAccess" && !callee.children.empty()) {
                std::string target = base_contract(ast_.node(callee.children.front()));
                if (!target.empty()) {
                    if (auto b = resolve(callee.text, target, call_arity))
                        out.push_back({caller_, *b});
                }
            }
        }
        for (int c : n.children) walk_calls(c, out);
    }

    /// x in `x.f()` names a contract either directly, through a declared
    /// contract-typed variable, or through a cast `Contract(addr).f()`.
    std::string base_contract(const sol::AstNode& base) const {
        if (base.kind == "Identifier") {
            if (contract_names_.count(base.text)) return base.text;
            if (auto it = var_types_.find(base.text); it != var_types_.end())
                if (contract_names_.count(it->second)) return it->second;
            return {};
        }
        if (base.kind == "FunctionCall" && !base.children.empty()) {
            const sol::AstNode& callee = ast_.node(base.children.front());
            if (callee.kind == "Identifier" && contract_names_.count(callee.text))
                return callee.text;
        }
        return {};
    }

    /// Name match first, then arity; a name-unique candidate wins even when
    /// no arity matches, otherwise the call stays unresolved.
    std::optional<std::size_t> resolve(const std::string& name, const std::string& contract,
                                       int arity) const {
        std::vector<const FunctionRef*> named;
        for (const FunctionRef& f : functions_)
            if (f.name == name && f.contract == contract) named.push_back(&f);
        if (named.empty()) return std::nullopt;
        for (const FunctionRef* f : named)
            if (f->arity == arity) return f->index;
        if (named.size() == 1) return named.front()->index;
        return std::nullopt;
    }
};

}  // namespace detail

/// Invocation edges between functions defined in the same file, as
/// (caller index, callee index) into list_functions order.
inline std::vector<std::pair<std::size_t, std::size_t>> extract_call_edges(
    const sol::NormalizedAst& ast) {
    return detail::CallExtractor(ast).extract();
}

/// Builds the contract-level nested graph: one Mrfg per function plus the
/// deduplicated invocation edges.
inline Mrng build_mrng(const sol::NormalizedAst& ast) {
    Mrng g;
    g.contract_id = ast.path;
    auto fns = sol::list_functions(ast);
    for (const sol::FunctionAst& fn : fns) g.functions.push_back(build_mrfg(fn, ast));
    for (auto [a, b] : extract_call_edges(ast))
        g.calls.emplace_back(static_cast<int>(a), static_cast<int>(b));
    return g;
}

}  // namespace mrn::graph
