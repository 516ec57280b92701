#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mrn/ast.hpp"
#include "mrn/lexer.hpp"

namespace mrn::sol {

namespace detail {

/// Parse-time tree node; flattened into dense pre-order ids afterwards.
struct Node {
    std::string kind;
    std::string text;
    std::vector<std::unique_ptr<Node>> children;
    Span span{0, 0, 0, 0};
};

using NodePtr = std::unique_ptr<Node>;

inline NodePtr make_node(std::string kind, std::string text = {}) {
    auto n = std::make_unique<Node>();
    n->kind = std::move(kind);
    n->text = std::move(text);
    return n;
}

inline bool is_elementary_type(const std::string& s) {
    if (s == "bool" || s == "address" || s == "string" || s == "byte" || s == "var") return true;
    auto sized = [&](const std::string& base) {
        if (s.rfind(base, 0) != 0) return false;
        std::string suffix = s.substr(base.size());
        if (suffix.empty()) return true;
        for (char c : suffix)
            if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        return !suffix.empty();
    };
    return sized("uint") || sized("int") || sized("bytes") || sized("fixed") || sized("ufixed");
}

inline bool is_number_unit(const std::string& s) {
    static const char* units[] = {"wei",     "szabo",   "finney", "ether", "seconds",
                                  "minutes", "hours",   "days",   "weeks", "years"};
    for (const char* u : units)
        if (s == u) return true;
    return false;
}

class Parser {
public:
    explicit Parser(std::string_view source) : lexer_(source), toks_(lexer_.tokens()) {}

    NodePtr parse_unit() {
        auto unit = make_node("SourceUnit");
        begin_span(*unit);
        while (!at_end()) {
            if (is_ident("pragma") || is_ident("import")) {
                unit->children.push_back(opaque_until_semi());
            } else if (is_ident("contract") || is_ident("library") || is_ident("interface")) {
                unit->children.push_back(parse_contract());
            } else {
                fail("expected a contract, pragma, or import");
            }
        }
        end_span(*unit);
        return unit;
    }

private:
    Lexer lexer_;
    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;

    const Token& cur() const { return toks_[pos_]; }
    const Token& look(std::size_t n) const {
        return toks_[std::min(pos_ + n, toks_.size() - 1)];
    }
    bool at_end() const { return cur().kind == TokKind::End; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw SyntaxError(cur().line, cur().column, msg);
    }

    bool is_ident(const char* s) const {
        return cur().kind == TokKind::Identifier && cur().text == s;
    }
    bool is_punct(const char* s) const { return cur().kind == TokKind::Punct && cur().text == s; }

    Token take() {
        if (at_end()) fail("unexpected end of input");
        return toks_[pos_++];
    }

    Token expect_punct(const char* s) {
        if (!is_punct(s)) fail(std::string("expected '") + s + "'");
        return take();
    }

    Token expect_ident() {
        if (cur().kind != TokKind::Identifier) fail("expected an identifier");
        return take();
    }

    void begin_span(Node& n) const {
        n.span[0] = cur().line;
        n.span[1] = cur().column;
    }
    void end_span(Node& n) const {
        const Token& prev = toks_[pos_ > 0 ? pos_ - 1 : 0];
        n.span[2] = prev.end_line;
        n.span[3] = prev.end_column;
    }
    static void span_from_token(Node& n, const Token& t) {
        n.span = {t.line, t.column, t.end_line, t.end_column};
    }

    /// Consume tokens through the next ';' and wrap them in an opaque leaf.
    NodePtr opaque_until_semi() {
        auto n = make_node("Unsupported");
        begin_span(*n);
        while (!at_end() && !is_punct(";")) {
            if (is_punct("{")) {
                skip_balanced("{", "}");
                continue;
            }
            take();
        }
        if (is_punct(";")) take();
        end_span(*n);
        return n;
    }

    /// Consume a balanced bracket group (opener already current).
    void skip_balanced(const char* open, const char* close) {
        expect_punct(open);
        int depth = 1;
        while (depth > 0) {
            if (at_end()) fail(std::string("unbalanced '") + open + "'");
            if (is_punct(open)) ++depth;
            if (is_punct(close)) --depth;
            take();
        }
    }

    NodePtr opaque_block_construct() {
        auto n = make_node("Unsupported");
        begin_span(*n);
        while (!at_end() && !is_punct("{") && !is_punct(";")) take();
        if (is_punct("{"))
            skip_balanced("{", "}");
        else if (is_punct(";"))
            take();
        end_span(*n);
        return n;
    }

    // -- contracts ---------------------------------------------------------

    NodePtr parse_contract() {
        auto contract = make_node("ContractDefinition");
        begin_span(*contract);
        take();  // contract | library | interface
        contract->text = expect_ident().text;
        if (is_ident("is")) {
            auto bases = make_node("Unsupported");
            begin_span(*bases);
            while (!at_end() && !is_punct("{")) take();
            end_span(*bases);
            contract->children.push_back(std::move(bases));
        }
        expect_punct("{");
        while (!is_punct("}")) {
            if (at_end()) fail("unterminated contract body");
            contract->children.push_back(parse_contract_member());
        }
        take();  // }
        end_span(*contract);
        return contract;
    }

    NodePtr parse_contract_member() {
        if (is_ident("function") || is_ident("constructor")) return parse_function();
        if (is_ident("modifier") || is_ident("struct") || is_ident("enum") || is_ident("event") ||
            is_ident("using") || is_ident("assembly"))
            return opaque_block_construct();
        if (starts_type()) return parse_variable_declaration(/*require_semi=*/true);
        fail("expected a contract member");
    }

    NodePtr parse_function() {
        auto fn = make_node("FunctionDefinition");
        begin_span(*fn);
        bool ctor_keyword = is_ident("constructor");
        take();  // function | constructor
        if (ctor_keyword)
            fn->text = "constructor";
        else if (cur().kind == TokKind::Identifier)
            fn->text = expect_ident().text;  // nameless => fallback function
        fn->children.push_back(parse_parameter_list("Parameters"));

        auto returns = make_node("ReturnParameters");
        span_from_token(*returns, cur());
        while (!is_punct("{") && !is_punct(";")) {
            if (at_end()) fail("unterminated function header");
            if (is_ident("returns")) {
                take();
                returns = parse_parameter_list("ReturnParameters");
            } else if (cur().kind == TokKind::Identifier) {
                take();  // visibility, mutability, or custom modifier name
                if (is_punct("(")) skip_balanced("(", ")");
            } else {
                fail("unexpected token in function header");
            }
        }
        auto body = make_node("Block");
        if (is_punct(";")) {
            span_from_token(*body, cur());
            take();
        } else {
            body = parse_block();
        }
        fn->children.push_back(std::move(returns));
        fn->children.push_back(std::move(body));
        end_span(*fn);
        return fn;
    }

    NodePtr parse_parameter_list(const char* kind) {
        auto params = make_node(kind);
        begin_span(*params);
        expect_punct("(");
        while (!is_punct(")")) {
            if (at_end()) fail("unterminated parameter list");
            auto decl = make_node("VariableDeclaration");
            begin_span(*decl);
            auto type = parse_type_name();
            while (is_ident("memory") || is_ident("storage") || is_ident("calldata") ||
                   is_ident("indexed") || is_ident("payable"))
                take();
            if (cur().kind == TokKind::Identifier && !is_ident("memory")) decl->text = take().text;
            decl->children.push_back(std::move(type));
            end_span(*decl);
            params->children.push_back(std::move(decl));
            if (is_punct(","))
                take();
            else if (!is_punct(")"))
                fail("expected ',' or ')' in parameter list");
        }
        take();  // )
        end_span(*params);
        return params;
    }

    // -- types -------------------------------------------------------------

    bool starts_type() const {
        if (cur().kind != TokKind::Identifier) return false;
        if (is_elementary_type(cur().text) || cur().text == "mapping") return true;
        // user type: "Name name", "Name[] name", "Name name =", "Name name;"
        std::size_t i = 1;
        if (look(i).kind == TokKind::Punct && look(i).text == "[") {
            if (!(look(i + 1).kind == TokKind::Punct && look(i + 1).text == "]")) return false;
            i += 2;
        }
        if (look(i).kind != TokKind::Identifier) return false;
        const Token& after = look(i + 1);
        if (after.kind != TokKind::Punct) return false;
        return after.text == ";" || after.text == "=" || after.text == "," || after.text == ")";
    }

    NodePtr parse_type_name() {
        auto node = make_node("ElementaryTypeName");
        begin_span(*node);
        node->text = type_text();
        end_span(*node);
        return node;
    }

    std::string type_text() {
        std::string text;
        if (is_ident("mapping")) {
            take();
            skip_balanced("(", ")");
            text = "mapping";
        } else {
            text = expect_ident().text;
        }
        while (is_punct("[")) {
            take();
            if (!is_punct("]")) parse_expression();  // fixed-size arrays
            expect_punct("]");
            text += "[]";
        }
        // address payable
        if (text == "address" && is_ident("payable")) take();
        return text;
    }

    /// `uint x = expr;` and state variables. Visibility keywords are dropped.
    NodePtr parse_variable_declaration(bool require_semi) {
        auto decl = make_node("VariableDeclaration");
        begin_span(*decl);
        decl->children.push_back(parse_type_name());
        while (is_ident("public") || is_ident("private") || is_ident("internal") ||
               is_ident("constant") || is_ident("memory") || is_ident("storage") ||
               is_ident("calldata") || is_ident("payable"))
            take();
        decl->text = expect_ident().text;
        if (is_punct("=")) {
            take();
            decl->children.push_back(parse_expression());
        }
        if (require_semi) expect_punct(";");
        end_span(*decl);
        return decl;
    }

    // -- statements ----------------------------------------------------------

    NodePtr parse_block() {
        auto block = make_node("Block");
        begin_span(*block);
        expect_punct("{");
        while (!is_punct("}")) {
            if (at_end()) fail("unterminated block");
            block->children.push_back(parse_statement());
        }
        take();  // }
        end_span(*block);
        return block;
    }

    /// A single statement wrapped in a Block, unless it already is one.
    NodePtr parse_body() {
        if (is_punct("{")) return parse_block();
        auto block = make_node("Block");
        begin_span(*block);
        block->children.push_back(parse_statement());
        end_span(*block);
        return block;
    }

    NodePtr parse_statement() {
        if (is_punct("{")) return parse_block();
        if (is_ident("if")) return parse_if();
        if (is_ident("while")) return parse_while();
        if (is_ident("for")) return parse_for();
        if (is_ident("return")) return parse_return();
        if (is_ident("require") && look(1).kind == TokKind::Punct && look(1).text == "(")
            return parse_require();
        if (is_ident("assembly")) return opaque_block_construct();
        if (is_ident("emit") || is_ident("throw") || is_ident("delete") || is_ident("break") ||
            is_ident("continue"))
            return opaque_until_semi();
        if (starts_type()) return parse_variable_declaration(/*require_semi=*/true);

        auto stmt = make_node("ExpressionStatement");
        begin_span(*stmt);
        stmt->children.push_back(parse_expression());
        expect_punct(";");
        end_span(*stmt);
        return stmt;
    }

    NodePtr parse_if() {
        auto node = make_node("IfStatement");
        begin_span(*node);
        take();  // if
        expect_punct("(");
        node->children.push_back(parse_expression());
        expect_punct(")");
        node->children.push_back(parse_body());
        if (is_ident("else")) {
            take();
            node->children.push_back(parse_body());
        }
        end_span(*node);
        return node;
    }

    NodePtr parse_while() {
        auto node = make_node("WhileStatement");
        begin_span(*node);
        take();  // while
        expect_punct("(");
        node->children.push_back(parse_expression());
        expect_punct(")");
        node->children.push_back(parse_body());
        end_span(*node);
        return node;
    }

    /// ForStatement always carries exactly four children
    /// [init, condition, update, body]; an absent clause is an empty Block.
    NodePtr parse_for() {
        auto node = make_node("ForStatement");
        begin_span(*node);
        take();  // for
        expect_punct("(");
        auto empty_clause = [&]() {
            auto b = make_node("Block");
            span_from_token(*b, cur());
            return b;
        };
        if (is_punct(";")) {
            node->children.push_back(empty_clause());
            take();
        } else if (starts_type()) {
            node->children.push_back(parse_variable_declaration(/*require_semi=*/true));
        } else {
            node->children.push_back(parse_expression());
            expect_punct(";");
        }
        if (is_punct(";")) {
            node->children.push_back(empty_clause());
        } else {
            node->children.push_back(parse_expression());
        }
        expect_punct(";");
        if (is_punct(")")) {
            node->children.push_back(empty_clause());
        } else {
            node->children.push_back(parse_expression());
        }
        expect_punct(")");
        node->children.push_back(parse_body());
        end_span(*node);
        return node;
    }

    NodePtr parse_return() {
        auto node = make_node("Return");
        begin_span(*node);
        take();  // return
        if (!is_punct(";")) node->children.push_back(parse_expression());
        expect_punct(";");
        end_span(*node);
        return node;
    }

    NodePtr parse_require() {
        auto node = make_node("Require");
        begin_span(*node);
        take();  // require
        expect_punct("(");
        node->children.push_back(parse_expression());
        while (is_punct(",")) {
            take();
            node->children.push_back(parse_expression());
        }
        expect_punct(")");
        expect_punct(";");
        end_span(*node);
        return node;
    }

    // -- expressions ---------------------------------------------------------

    NodePtr parse_expression() { return parse_assignment(); }

    NodePtr parse_assignment() {
        auto lhs = parse_ternary();
        static const char* assign_ops[] = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^="};
        for (const char* op : assign_ops) {
            if (is_punct(op)) {
                auto node = make_node("Assignment", op);
                node->span = lhs->span;
                take();
                auto rhs = parse_assignment();  // right associative
                node->span[2] = rhs->span[2];
                node->span[3] = rhs->span[3];
                node->children.push_back(std::move(lhs));
                node->children.push_back(std::move(rhs));
                return node;
            }
        }
        return lhs;
    }

    /// Conditional expressions are outside the subset; the whole expression
    /// degrades to an opaque leaf.
    NodePtr parse_ternary() {
        auto cond = parse_binary(0);
        if (!is_punct("?")) return cond;
        take();
        parse_expression();
        expect_punct(":");
        auto last = parse_ternary();
        auto node = make_node("Unsupported");
        node->span = cond->span;
        node->span[2] = last->span[2];
        node->span[3] = last->span[3];
        return node;
    }

    static int binary_precedence(const std::string& op) {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "|") return 3;
        if (op == "^") return 4;
        if (op == "&") return 5;
        if (op == "==" || op == "!=") return 6;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 7;
        if (op == "<<" || op == ">>") return 8;
        if (op == "+" || op == "-") return 9;
        if (op == "*" || op == "/" || op == "%") return 10;
        if (op == "**") return 11;
        return -1;
    }

    NodePtr parse_binary(int min_prec) {
        auto lhs = parse_unary();
        while (cur().kind == TokKind::Punct) {
            int prec = binary_precedence(cur().text);
            if (prec < 0 || prec < min_prec) break;
            std::string op = take().text;
            auto rhs = parse_binary(op == "**" ? prec : prec + 1);
            auto node = make_node("BinaryOperation", op);
            node->span = lhs->span;
            node->span[2] = rhs->span[2];
            node->span[3] = rhs->span[3];
            node->children.push_back(std::move(lhs));
            node->children.push_back(std::move(rhs));
            lhs = std::move(node);
        }
        return lhs;
    }

    NodePtr parse_unary() {
        static const char* prefix_ops[] = {"!", "~", "-", "+", "++", "--"};
        for (const char* op : prefix_ops) {
            if (is_punct(op)) {
                auto node = make_node("UnaryOperation", op);
                begin_span(*node);
                take();
                node->children.push_back(parse_unary());
                end_span(*node);
                return node;
            }
        }
        return parse_postfix();
    }

    NodePtr parse_postfix() {
        auto expr = parse_primary();
        while (true) {
            if (is_punct("(")) {
                auto call = make_node("FunctionCall");
                call->span = expr->span;
                take();
                call->children.push_back(std::move(expr));
                while (!is_punct(")")) {
                    if (at_end()) fail("unterminated call argument list");
                    call->children.push_back(parse_expression());
                    if (is_punct(","))
                        take();
                    else if (!is_punct(")"))
                        fail("expected ',' or ')' in call");
                }
                take();
                end_span(*call);
                expr = std::move(call);
            } else if (is_punct(".")) {
                take();
                auto member = make_node("MemberAccess", expect_ident().text);
                member->span = expr->span;
                end_span(*member);
                member->children.push_back(std::move(expr));
                expr = std::move(member);
            } else if (is_punct("[")) {
                auto index = make_node("IndexAccess");
                index->span = expr->span;
                take();
                index->children.push_back(std::move(expr));
                index->children.push_back(parse_expression());
                expect_punct("]");
                end_span(*index);
                expr = std::move(index);
            } else if (is_punct("{")) {
                // Call options `x.call{value: v}(...)` desugar to the member
                // chain form `x.call.value(v)(...)`, so both spellings build
                // the same graph.
                take();
                while (!is_punct("}")) {
                    if (at_end()) fail("unterminated call options");
                    std::string name = expect_ident().text;
                    expect_punct(":");
                    auto value = parse_expression();
                    auto member = make_node("MemberAccess", name);
                    member->span = expr->span;
                    member->children.push_back(std::move(expr));
                    auto call = make_node("FunctionCall");
                    call->span = member->span;
                    call->span[2] = value->span[2];
                    call->span[3] = value->span[3];
                    call->children.push_back(std::move(member));
                    call->children.push_back(std::move(value));
                    expr = std::move(call);
                    if (is_punct(",")) take();
                }
                take();
            } else if (is_punct("++") || is_punct("--")) {
                auto node = make_node("UnaryOperation", cur().text);
                node->span = expr->span;
                take();
                end_span(*node);
                node->children.push_back(std::move(expr));
                expr = std::move(node);
            } else {
                break;
            }
        }
        return expr;
    }

    NodePtr parse_primary() {
        if (cur().kind == TokKind::Number) {
            Token t = take();
            std::string text = t.text;
            if (cur().kind == TokKind::Identifier && is_number_unit(cur().text))
                text += " " + take().text;
            auto node = make_node("Literal", text);
            span_from_token(*node, t);
            node->span[2] = toks_[pos_ - 1].end_line;
            node->span[3] = toks_[pos_ - 1].end_column;
            return node;
        }
        if (cur().kind == TokKind::String) {
            Token t = take();
            auto node = make_node("Literal", t.text);
            span_from_token(*node, t);
            return node;
        }
        if (is_punct("(")) {
            take();
            auto inner = parse_expression();
            if (is_punct(",")) {  // tuple expressions are outside the subset
                auto node = make_node("Unsupported");
                node->span = inner->span;
                while (!is_punct(")")) {
                    if (at_end()) fail("unterminated tuple");
                    take();
                    if (!is_punct(")")) parse_expression();
                }
                take();
                end_span(*node);
                return node;
            }
            expect_punct(")");
            return inner;
        }
        if (cur().kind == TokKind::Identifier) {
            if (is_ident("new")) {
                auto node = make_node("Unsupported");
                begin_span(*node);
                take();
                expect_ident();
                if (is_punct("(")) skip_balanced("(", ")");
                end_span(*node);
                return node;
            }
            if (is_ident("true") || is_ident("false")) {
                Token t = take();
                auto node = make_node("Literal", t.text);
                span_from_token(*node, t);
                return node;
            }
            if (is_ident("mapping")) fail("mapping type is not an expression");
            // Elementary type names in expression position are casts; they
            // behave as callees, so an Identifier keeps them in the graph.
            Token t = take();
            auto node = make_node("Identifier", t.text);
            span_from_token(*node, t);
            return node;
        }
        fail("expected an expression");
    }
};

/// Flattens the parse tree into dense pre-order ids.
inline int flatten(const Node& n, NormalizedAst& out) {
    int id = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    out.nodes[id].id = id;
    out.nodes[id].kind = n.kind;
    out.nodes[id].text = n.text;
    out.nodes[id].span = n.span;
    for (const auto& child : n.children) {
        int cid = flatten(*child, out);
        out.nodes[id].children.push_back(cid);
    }
    return id;
}

}  // namespace detail

/// Parses a supported subset of Solidity into a NormalizedAst. Constructs
/// outside the subset degrade to opaque Unsupported leaves. Throws
/// SyntaxError / EncodingError on malformed input.
inline NormalizedAst parse_source(const SourceFile& file) {
    validate_utf8(file.content);
    detail::Parser parser(file.content);
    auto unit = parser.parse_unit();
    NormalizedAst ast;
    ast.path = file.path;
    ast.root = detail::flatten(*unit, ast);
    return ast;
}

}  // namespace mrn::sol
