#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "mrn/errors.hpp"

namespace mrn::sol {

/// Rejects byte sequences that are not well-formed UTF-8.
inline void validate_utf8(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        std::size_t extra;
        if (c < 0x80) {
            extra = 0;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            extra = 3;
        } else {
            throw EncodingError("invalid UTF-8 byte at offset " + std::to_string(i));
        }
        if (i + extra >= bytes.size())
            throw EncodingError("truncated UTF-8 sequence at offset " + std::to_string(i));
        for (std::size_t k = 1; k <= extra; ++k) {
            unsigned char cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80)
                throw EncodingError("invalid UTF-8 continuation at offset " +
                                    std::to_string(i + k));
        }
        i += extra + 1;
    }
}

enum class TokKind { Identifier, Number, String, Punct, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;
    int line = 1;
    int column = 1;      // 1-based column of the first character
    int end_line = 1;
    int end_column = 1;  // 1-based column of the last character
};

/// Tokenizes the Solidity subset. Comments are skipped; positions are
/// tracked for diagnostics and AST spans.
class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { tokenize(); }

    const std::vector<Token>& tokens() const { return tokens_; }

private:
    std::string_view src_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;

    [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(line_, col_, msg); }

    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
    }

    char advance() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
    static bool ident_cont(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

    void skip_space_and_comments() {
        while (pos_ < src_.size()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && peek() != '\n') advance();
            } else if (c == '/' && peek(1) == '*') {
                advance();
                advance();
                while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
                if (pos_ >= src_.size()) fail("unterminated block comment");
                advance();
                advance();
            } else {
                break;
            }
        }
    }

    void push(TokKind kind, std::string text, int line, int col) {
        Token t;
        t.kind = kind;
        t.text = std::move(text);
        t.line = line;
        t.column = col;
        t.end_line = line_;
        t.end_column = col_ > 1 ? col_ - 1 : 1;
        tokens_.push_back(std::move(t));
    }

    void tokenize() {
        while (true) {
            skip_space_and_comments();
            if (pos_ >= src_.size()) break;
            int line = line_, col = col_;
            char c = peek();
            if (ident_start(c)) {
                std::string s;
                while (pos_ < src_.size() && ident_cont(peek())) s += advance();
                push(TokKind::Identifier, std::move(s), line, col);
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string s;
                if (c == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
                    s += advance();
                    s += advance();
                    while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(peek())))
                        s += advance();
                } else {
                    while (pos_ < src_.size() &&
                           (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' ||
                            peek() == 'e' || peek() == 'E'))
                        s += advance();
                }
                push(TokKind::Number, std::move(s), line, col);
            } else if (c == '"' || c == '\'') {
                char quote = advance();
                std::string s;
                while (pos_ < src_.size() && peek() != quote) {
                    if (peek() == '\\') s += advance();
                    if (pos_ >= src_.size()) break;
                    s += advance();
                }
                if (pos_ >= src_.size()) fail("unterminated string literal");
                advance();
                push(TokKind::String, std::move(s), line, col);
            } else {
                push(TokKind::Punct, punct(), line, col);
            }
        }
        Token eof;
        eof.kind = TokKind::End;
        eof.line = line_;
        eof.column = col_;
        eof.end_line = line_;
        eof.end_column = col_;
        tokens_.push_back(std::move(eof));
    }

    /// Longest-match punctuation / operator.
    std::string punct() {
        static const char* three[] = {"**=", "<<=", ">>="};
        static const char* two[] = {"==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=",
                                    "%=", "&=", "|=", "^=", "++", "--", "**", "<<", ">>", "=>"};
        for (const char* op : three) {
            if (src_.substr(pos_, 3) == op) {
                advance(); advance(); advance();
                return op;
            }
        }
        for (const char* op : two) {
            if (src_.substr(pos_, 2) == op) {
                advance(); advance();
                return op;
            }
        }
        char c = peek();
        static const std::string singles = "(){}[];,.?:=<>+-*/%!&|^~";
        if (singles.find(c) == std::string::npos) fail(std::string("unexpected character '") + c + "'");
        advance();
        return std::string(1, c);
    }
};

}  // namespace mrn::sol
