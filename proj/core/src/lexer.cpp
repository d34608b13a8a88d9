#include "iotecs/lexer.hpp"

#include <cctype>
#include <stdexcept>

namespace iotecs {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

} // namespace

Lexer::Lexer(std::string_view src) : src_(src) {}

char Lexer::current() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
char Lexer::lookahead() const { return pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0'; }
bool Lexer::at_end() const { return pos_ >= src_.size(); }

void Lexer::advance() {
    if (at_end()) return;
    if (src_[pos_] == '\n') {
        line_++;
        column_ = 1;
    } else {
        column_++;
    }
    pos_++;
}

Token Lexer::make(TokKind kind, SourceLoc loc, std::string text) {
    Token t;
    t.kind = kind;
    t.loc = loc;
    t.text = std::move(text);
    return t;
}

const Token& Lexer::peek() {
    if (!has_peek_) {
        peek_ = lex();
        has_peek_ = true;
    }
    return peek_;
}

Token Lexer::next() {
    if (has_peek_) {
        has_peek_ = false;
        return std::move(peek_);
    }
    return lex();
}

Token Lexer::lex() {
    // Skip whitespace and // comments.
    for (;;) {
        while (!at_end() && std::isspace(static_cast<unsigned char>(current()))) advance();
        if (current() == '/' && lookahead() == '/') {
            while (!at_end() && current() != '\n') advance();
            continue;
        }
        break;
    }

    SourceLoc loc{line_, column_};
    if (at_end()) return make(TokKind::End, loc);

    char c = current();
    switch (c) {
    case ':': advance(); return make(TokKind::Colon, loc, ":");
    case ',': advance(); return make(TokKind::Comma, loc, ",");
    case '.': advance(); return make(TokKind::Dot, loc, ".");
    case '{': advance(); return make(TokKind::LBrace, loc, "{");
    case '}': advance(); return make(TokKind::RBrace, loc, "}");
    case '[': advance(); return make(TokKind::LBracket, loc, "[");
    case ']': advance(); return make(TokKind::RBracket, loc, "]");
    default: break;
    }

    if (c == '"') {
        advance();
        Token t = make(TokKind::String, loc);
        while (!at_end() && current() != '"') {
            char ch = current();
            if (ch == '\n') {
                return make(TokKind::Invalid, loc, "unterminated string literal");
            }
            if (ch == '\\') {
                advance();
                char esc = current();
                switch (esc) {
                case '\\': t.bytes.push_back('\\'); break;
                case '"': t.bytes.push_back('"'); break;
                case 'n': t.bytes.push_back('\n'); break;
                case 't': t.bytes.push_back('\t'); break;
                case 'r': t.bytes.push_back('\r'); break;
                case '0': t.bytes.push_back('\0'); break;
                case 'x': {
                    advance();
                    int hi = std::isxdigit(static_cast<unsigned char>(current()))
                                 ? std::stoi(std::string(1, current()), nullptr, 16) : -1;
                    advance();
                    int lo = std::isxdigit(static_cast<unsigned char>(current()))
                                 ? std::stoi(std::string(1, current()), nullptr, 16) : -1;
                    if (hi < 0 || lo < 0)
                        return make(TokKind::Invalid, loc, "invalid \\x escape (expected two hex digits)");
                    t.bytes.push_back(static_cast<uint8_t>(hi * 16 + lo));
                    break;
                }
                default:
                    return make(TokKind::Invalid, loc,
                                std::string("unknown escape '\\") + esc + "'");
                }
                advance();
                continue;
            }
            t.bytes.push_back(static_cast<uint8_t>(ch));
            advance();
        }
        if (at_end()) return make(TokKind::Invalid, loc, "unterminated string literal");
        advance(); // closing quote
        t.text.assign(t.bytes.begin(), t.bytes.end());
        return t;
    }

    if (std::isdigit(static_cast<unsigned char>(c))) {
        std::string digits;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(current()))) {
            digits.push_back(current());
            advance();
        }
        int64_t value = 0;
        try {
            value = std::stoll(digits);
        } catch (const std::out_of_range&) {
            return make(TokKind::Invalid, loc, "integer literal out of range: " + digits);
        }
        // A unit suffix binds only when attached: "10s", "60B", "2G".
        if (is_ident_start(current())) {
            std::string suffix;
            while (!at_end() && is_ident_char(current())) {
                suffix.push_back(current());
                advance();
            }
            Token t = make(TokKind::Scaled, loc, digits + suffix);
            t.int_value = value;
            t.suffix = std::move(suffix);
            return t;
        }
        Token t = make(TokKind::Int, loc, digits);
        t.int_value = value;
        return t;
    }

    if (is_ident_start(c)) {
        std::string name;
        while (!at_end() && is_ident_char(current())) {
            name.push_back(current());
            advance();
        }
        return make(TokKind::Ident, loc, std::move(name));
    }

    advance();
    return make(TokKind::Invalid, loc, std::string("unexpected character '") + c + "'");
}

std::vector<Token> Lexer::tokenize(std::string_view src) {
    Lexer lx(src);
    std::vector<Token> out;
    for (;;) {
        Token t = lx.next();
        bool end = t.kind == TokKind::End;
        out.push_back(std::move(t));
        if (end) break;
    }
    return out;
}

} // namespace iotecs
