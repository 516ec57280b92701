#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mrn/ast.hpp"

namespace mrn::sol {

inline constexpr const char* kAstFormatTag = "mrn-ast/1";

/// Serializes a NormalizedAst to the mrn-ast/1 interchange JSON.
inline std::string emit_ast_json(const NormalizedAst& ast) {
    nlohmann::ordered_json doc;
    doc["format"] = kAstFormatTag;
    doc["path"] = ast.path;
    doc["nodes"] = nlohmann::ordered_json::array();
    for (const AstNode& n : ast.nodes) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["kind"] = n.kind;
        if (n.text.empty())
            jn["text"] = nullptr;
        else
            jn["text"] = n.text;
        jn["children"] = n.children;
        jn["span"] = n.span;
        doc["nodes"].push_back(std::move(jn));
    }
    doc["root"] = ast.root;
    return doc.dump(2) + "\n";
}

namespace detail {

struct RawAstNode {
    std::string kind;
    std::string text;
    std::vector<int> children;
    Span span{0, 0, 0, 0};
};

inline void mark_subtree(const std::vector<RawAstNode>& raw, int id, std::vector<char>& visited) {
    if (id < 0 || id >= static_cast<int>(raw.size()))
        throw FormatError("nodes[" + std::to_string(id) + "]: child id references a missing node");
    if (visited[static_cast<std::size_t>(id)])
        throw FormatError("nodes[" + std::to_string(id) + "]: node has more than one parent");
    visited[static_cast<std::size_t>(id)] = 1;
    for (int child : raw[static_cast<std::size_t>(id)].children) mark_subtree(raw, child, visited);
}

/// Rebuilds the tree from `id` with dense pre-order ids. Nodes whose kind is
/// outside the vocabulary become opaque Unsupported leaves, dropping their
/// subtrees, so ids are renumbered as we go.
inline int rebuild(const std::vector<RawAstNode>& raw, int id, std::vector<char>& visited,
                   NormalizedAst& out) {
    if (id < 0 || id >= static_cast<int>(raw.size()))
        throw FormatError("nodes[" + std::to_string(id) + "]: child id references a missing node");
    if (visited[static_cast<std::size_t>(id)])
        throw FormatError("nodes[" + std::to_string(id) + "]: node has more than one parent");
    visited[static_cast<std::size_t>(id)] = 1;
    const RawAstNode& src = raw[static_cast<std::size_t>(id)];
    int new_id = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    out.nodes[new_id].id = new_id;
    out.nodes[new_id].span = src.span;
    if (!is_known_kind(src.kind)) {
        out.nodes[new_id].kind = "Unsupported";
        for (int child : src.children) mark_subtree(raw, child, visited);
        return new_id;
    }
    out.nodes[new_id].kind = src.kind;
    out.nodes[new_id].text = src.text;
    if (src.kind == "Unsupported") {
        for (int child : src.children) mark_subtree(raw, child, visited);
        return new_id;  // opaque leaves never keep children
    }
    for (int child : src.children) {
        int cid = rebuild(raw, child, visited, out);
        out.nodes[new_id].children.push_back(cid);
    }
    return new_id;
}

}  // namespace detail

/// Parses mrn-ast/1 interchange bytes into a NormalizedAst with the same
/// semantics as parse_source. Throws FormatError naming the first offending
/// JSON path; unknown node kinds map to Unsupported leaves.
inline NormalizedAst ingest_ast_json(const std::string& bytes) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("$: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("$: expected an object");
    if (!doc.contains("format") || !doc["format"].is_string())
        throw FormatError("$.format: missing or not a string");
    if (doc["format"].get<std::string>() != kAstFormatTag)
        throw VersionError("$.format: unknown format tag \"" +
                           doc["format"].get<std::string>() + "\"");
    if (!doc.contains("nodes") || !doc["nodes"].is_array())
        throw FormatError("$.nodes: missing or not an array");
    if (!doc.contains("root") || !doc["root"].is_number_integer())
        throw FormatError("$.root: missing or not an integer");

    std::vector<detail::RawAstNode> raw(doc["nodes"].size());
    std::vector<char> seen(doc["nodes"].size(), 0);
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const auto& jn = doc["nodes"][i];
        std::string at = "$.nodes[" + std::to_string(i) + "]";
        if (!jn.is_object()) throw FormatError(at + ": expected an object");
        if (!jn.contains("id") || !jn["id"].is_number_integer())
            throw FormatError(at + ".id: missing or not an integer");
        int id = jn["id"].get<int>();
        if (id < 0 || id >= static_cast<int>(raw.size()))
            throw FormatError(at + ".id: ids must be dense 0..N-1");
        if (seen[static_cast<std::size_t>(id)]) throw FormatError(at + ".id: duplicate id");
        seen[static_cast<std::size_t>(id)] = 1;
        detail::RawAstNode& node = raw[static_cast<std::size_t>(id)];
        if (!jn.contains("kind") || !jn["kind"].is_string())
            throw FormatError(at + ".kind: missing or not a string");
        node.kind = jn["kind"].get<std::string>();
        if (jn.contains("text") && !jn["text"].is_null()) {
            if (!jn["text"].is_string()) throw FormatError(at + ".text: expected string or null");
            node.text = jn["text"].get<std::string>();
        }
        if (!jn.contains("children") || !jn["children"].is_array())
            throw FormatError(at + ".children: missing or not an array");
        for (const auto& c : jn["children"]) {
            if (!c.is_number_integer())
                throw FormatError(at + ".children: expected integer ids");
            node.children.push_back(c.get<int>());
        }
        if (!jn.contains("span") || !jn["span"].is_array() || jn["span"].size() != 4)
            throw FormatError(at + ".span: expected an array of four integers");
        for (std::size_t k = 0; k < 4; ++k) node.span[k] = jn["span"][k].get<int>();
    }

    NormalizedAst ast;
    if (doc.contains("path") && doc["path"].is_string()) ast.path = doc["path"].get<std::string>();
    std::vector<char> visited(raw.size(), 0);
    ast.root = detail::rebuild(raw, doc["root"].get<int>(), visited, ast);
    for (std::size_t i = 0; i < visited.size(); ++i)
        if (!visited[i])
            throw FormatError("$.nodes[" + std::to_string(i) + "]: node unreachable from root");
    return ast;
}

}  // namespace mrn::sol
