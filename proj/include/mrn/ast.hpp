#pragma once

#include <array>
#include <string>
#include <vector>

#include "mrn/errors.hpp"

namespace mrn::sol {

/// One Solidity source file. `path` is used only in diagnostics.
struct SourceFile {
    std::string path;
    std::string content;
};

/// Closed node-kind vocabulary of the mrn-ast/1 interchange format.
/// New kinds require a format version bump.
inline const std::vector<std::string>& ast_kinds() {
    static const std::vector<std::string> kinds = {
        "SourceUnit",      "ContractDefinition", "FunctionDefinition", "Parameters",
        "ReturnParameters", "Block",             "VariableDeclaration", "ElementaryTypeName",
        "TypeName",        "IfStatement",        "WhileStatement",      "ForStatement",
        "Return",          "Require",            "ExpressionStatement", "Assignment",
        "BinaryOperation", "UnaryOperation",     "FunctionCall",        "MemberAccess",
        "IndexAccess",     "Identifier",         "Literal",             "Unsupported",
    };
    return kinds;
}

inline bool is_known_kind(const std::string& kind) {
    for (const auto& k : ast_kinds())
        if (k == kind) return true;
    return false;
}

/// Span is (start line, start column, end line, end column), all 1-based.
using Span = std::array<int, 4>;

struct AstNode {
    int id = 0;
    std::string kind;
    std::string text;  // identifier name, operator symbol, literal text, type name; empty if none
    std::vector<int> children;
    Span span{0, 0, 0, 0};
};

/// Pruned-free normalized syntax tree of one file. Node ids are dense
/// 0..N-1 in pre-order; the root is node 0 and has kind SourceUnit.
struct NormalizedAst {
    std::string path;
    std::vector<AstNode> nodes;
    int root = 0;

    const AstNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
};

struct FunctionAst {
    std::string name;  // "" for the fallback function; "constructor" for v0.5-style constructors
    int arity = 0;
    int root = 0;  // AstNode id of the FunctionDefinition
    bool is_fallback = false;
    bool is_constructor = false;
};

namespace detail {
inline void collect_functions(const NormalizedAst& ast, int contract_id,
                              std::vector<FunctionAst>& out) {
    const AstNode& contract = ast.node(contract_id);
    for (int child : contract.children) {
        const AstNode& n = ast.node(child);
        if (n.kind != "FunctionDefinition") continue;
        FunctionAst fn;
        fn.name = n.text;
        fn.root = n.id;
        fn.is_fallback = n.text.empty();
        fn.is_constructor = n.text == "constructor" || (!n.text.empty() && n.text == contract.text);
        for (int c : n.children) {
            if (ast.node(c).kind == "Parameters") {
                fn.arity = static_cast<int>(ast.node(c).children.size());
                break;
            }
        }
        out.push_back(std::move(fn));
    }
}
}  // namespace detail

/// One entry per FunctionDefinition in file order, spanning all contracts.
inline std::vector<FunctionAst> list_functions(const NormalizedAst& ast) {
    std::vector<FunctionAst> out;
    for (int child : ast.node(ast.root).children) {
        if (ast.node(child).kind == "ContractDefinition")
            detail::collect_functions(ast, child, out);
    }
    return out;
}

/// Name of the contract that lexically encloses the given function node.
inline std::string enclosing_contract(const NormalizedAst& ast, int fn_root) {
    for (int child : ast.node(ast.root).children) {
        const AstNode& contract = ast.node(child);
        if (contract.kind != "ContractDefinition") continue;
        for (int member : contract.children)
            if (member == fn_root) return contract.text;
    }
    return {};
}

}  // namespace mrn::sol
