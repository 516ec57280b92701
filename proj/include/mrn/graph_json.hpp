#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrn/graph.hpp"

namespace mrn::graph {

inline constexpr const char* kGraphFormatTag = "mrn-graph/1";

/// Serializes an Mrng to canonical mrn-graph/1 JSON (2-space indent, keys in
/// schema order, trailing newline).
inline std::string serialize_graph(const Mrng& g) {
    nlohmann::ordered_json doc;
    doc["format"] = kGraphFormatTag;
    doc["contract"] = g.contract_id;
    doc["functions"] = nlohmann::ordered_json::array();
    for (const Mrfg& f : g.functions) {
        nlohmann::ordered_json jf;
        jf["name"] = f.function_name;
        jf["arity"] = f.arity;
        jf["nodes"] = nlohmann::ordered_json::array();
        for (const GraphNode& n : f.nodes) {
            nlohmann::ordered_json jn;
            jn["id"] = n.id;
            jn["label"] = n.label;
            jf["nodes"].push_back(std::move(jn));
        }
        jf["edges"] = nlohmann::ordered_json::array();
        for (const Edge& e : f.edges) {
            nlohmann::ordered_json je;
            je["src"] = e.src;
            je["dst"] = e.dst;
            je["category"] = category_name(e.type.category);
            je["subtype"] = e.type.subtype;
            if (e.seq_index)
                je["seq"] = *e.seq_index;
            else
                je["seq"] = nullptr;
            jf["edges"].push_back(std::move(je));
        }
        doc["functions"].push_back(std::move(jf));
    }
    doc["calls"] = nlohmann::ordered_json::array();
    for (auto [caller, callee] : g.calls) {
        nlohmann::ordered_json jc;
        jc["caller"] = caller;
        jc["callee"] = callee;
        doc["calls"].push_back(std::move(jc));
    }
    return doc.dump(2) + "\n";
}

/// Parses mrn-graph/1 bytes. Subtypes outside a closed category set map to
/// UNK_EDGE and append a warning record; DataType subtypes are open (any
/// declared type text is valid). Throws FormatError naming the offending
/// JSON path, VersionError on an unknown format tag.
inline Mrng deserialize_graph(const std::string& bytes,
                              std::vector<std::string>* warnings = nullptr) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("$: invalid JSON: ") + e.what());
    }
    auto require = [](bool ok, const std::string& path, const char* what) {
        if (!ok) throw FormatError(path + ": " + what);
    };
    require(doc.is_object(), "$", "expected an object");
    require(doc.contains("format") && doc["format"].is_string(), "$.format",
            "missing or not a string");
    if (doc["format"].get<std::string>() != kGraphFormatTag)
        throw VersionError("$.format: unknown format tag \"" + doc["format"].get<std::string>() +
                           "\"");
    require(doc.contains("contract") && doc["contract"].is_string(), "$.contract",
            "missing or not a string");
    require(doc.contains("functions") && doc["functions"].is_array(), "$.functions",
            "missing or not an array");
    require(doc.contains("calls") && doc["calls"].is_array(), "$.calls",
            "missing or not an array");

    Mrng g;
    g.contract_id = doc["contract"].get<std::string>();
    for (std::size_t fi = 0; fi < doc["functions"].size(); ++fi) {
        const auto& jf = doc["functions"][fi];
        std::string at = "$.functions[" + std::to_string(fi) + "]";
        require(jf.is_object(), at, "expected an object");
        require(jf.contains("name") && jf["name"].is_string(), at + ".name",
                "missing or not a string");
        require(jf.contains("arity") && jf["arity"].is_number_integer(), at + ".arity",
                "missing or not an integer");
        require(jf.contains("nodes") && jf["nodes"].is_array(), at + ".nodes",
                "missing or not an array");
        require(jf.contains("edges") && jf["edges"].is_array(), at + ".edges",
                "missing or not an array");
        Mrfg f;
        f.function_name = jf["name"].get<std::string>();
        f.arity = jf["arity"].get<int>();
        for (std::size_t ni = 0; ni < jf["nodes"].size(); ++ni) {
            const auto& jn = jf["nodes"][ni];
            std::string nat = at + ".nodes[" + std::to_string(ni) + "]";
            require(jn.is_object() && jn.contains("id") && jn["id"].is_number_integer(), nat,
                    "expected {id, label}");
            require(jn.contains("label") && jn["label"].is_string(), nat + ".label",
                    "missing or not a string");
            f.nodes.push_back({jn["id"].get<int>(), jn["label"].get<std::string>()});
        }
        int node_count = static_cast<int>(f.nodes.size());
        for (std::size_t ei = 0; ei < jf["edges"].size(); ++ei) {
            const auto& je = jf["edges"][ei];
            std::string eat = at + ".edges[" + std::to_string(ei) + "]";
            require(je.is_object(), eat, "expected an object");
            require(je.contains("src") && je["src"].is_number_integer(), eat + ".src",
                    "missing or not an integer");
            require(je.contains("dst") && je["dst"].is_number_integer(), eat + ".dst",
                    "missing or not an integer");
            require(je.contains("category") && je["category"].is_string(), eat + ".category",
                    "missing or not a string");
            require(je.contains("subtype") && je["subtype"].is_string(), eat + ".subtype",
                    "missing or not a string");
            Edge e;
            e.src = je["src"].get<int>();
            e.dst = je["dst"].get<int>();
            require(e.src >= 0 && e.src < node_count, eat + ".src", "node id out of range");
            require(e.dst >= 0 && e.dst < node_count, eat + ".dst", "node id out of range");
            auto cat = category_from_name(je["category"].get<std::string>());
            require(cat.has_value(), eat + ".category", "unknown edge category");
            e.type.category = *cat;
            e.type.subtype = je["subtype"].get<std::string>();
            if (e.type.category != EdgeCategory::DataType) {
                const auto& closed = closed_subtypes(e.type.category);
                if (std::find(closed.begin(), closed.end(), e.type.subtype) == closed.end()) {
                    if (warnings)
                        warnings->push_back(eat + ".subtype: unknown subtype \"" + e.type.subtype +
                                            "\" mapped to UNK_EDGE");
                    e.type.subtype = "<unk_edge>";
                }
            }
            if (je.contains("seq") && !je["seq"].is_null()) {
                require(je["seq"].is_number_integer(), eat + ".seq", "expected integer or null");
                e.seq_index = je["seq"].get<int>();
            }
            f.edges.push_back(std::move(e));
        }
        g.functions.push_back(std::move(f));
    }
    for (std::size_t ci = 0; ci < doc["calls"].size(); ++ci) {
        const auto& jc = doc["calls"][ci];
        std::string cat = "$.calls[" + std::to_string(ci) + "]";
        require(jc.is_object() && jc.contains("caller") && jc["caller"].is_number_integer() &&
                    jc.contains("callee") && jc["callee"].is_number_integer(),
                cat, "expected {caller, callee}");
        int caller = jc["caller"].get<int>();
        int callee = jc["callee"].get<int>();
        int n = static_cast<int>(g.functions.size());
        require(caller >= 0 && caller < n && callee >= 0 && callee < n, cat,
                "call endpoint out of range");
        g.calls.emplace_back(caller, callee);
    }
    return g;
}

namespace detail {

inline const char* edge_color(EdgeCategory cat) {
    switch (cat) {
        case EdgeCategory::DataType: return "blue";
        case EdgeCategory::ControlInfo: return "black";
        case EdgeCategory::Fields: return "gray40";
        case EdgeCategory::DataFlow: return "red";
        case EdgeCategory::Fallback: return "orange";
        case EdgeCategory::SelfLoop: return "gray80";
    }
    return "black";
}

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline void dot_function(std::ostringstream& os, const Mrfg& f, const std::string& prefix,
                         const std::string& indent) {
    for (const GraphNode& n : f.nodes)
        os << indent << prefix << "n" << n.id << " [label=\"" << dot_escape(n.label) << "\"];\n";
    for (const Edge& e : f.edges) {
        os << indent << prefix << "n" << e.src << " -> " << prefix << "n" << e.dst << " [label=\"";
        os << dot_escape(e.type.subtype);
        if (e.seq_index) os << " " << *e.seq_index;
        os << "\", color=" << edge_color(e.type.category);
        if (e.type.category == EdgeCategory::SelfLoop) os << ", style=dotted";
        if (e.type.category == EdgeCategory::Fallback) os << ", style=dashed";
        if (e.type.category == EdgeCategory::DataFlow) os << ", style=dashed";
        os << "];\n";
    }
}

}  // namespace detail

inline std::string to_dot(const Mrfg& f) {
    std::ostringstream os;
    os << "digraph mrfg {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n";
    detail::dot_function(os, f, "", "  ");
    os << "}\n";
    return os.str();
}

/// Clustered DOT rendering: one cluster per function, call edges between
/// the entry nodes.
inline std::string to_dot(const Mrng& g) {
    std::ostringstream os;
    os << "digraph mrng {\n  rankdir=TB;\n  compound=true;\n  node [shape=box, fontsize=10];\n";
    for (std::size_t i = 0; i < g.functions.size(); ++i) {
        const Mrfg& f = g.functions[i];
        os << "  subgraph cluster_f" << i << " {\n";
        os << "    label=\"" << detail::dot_escape(f.function_name.empty() ? "<fallback>"
                                                                           : f.function_name)
           << "/" << f.arity << "\";\n";
        detail::dot_function(os, f, "f" + std::to_string(i) + "_", "    ");
        os << "  }\n";
    }
    for (auto [caller, callee] : g.calls)
        os << "  f" << caller << "_n0 -> f" << callee << "_n0 [label=\"call\", style=bold, "
           << "ltail=cluster_f" << caller << ", lhead=cluster_f" << callee << "];\n";
    os << "}\n";
    return os.str();
}

}  // namespace mrn::graph
