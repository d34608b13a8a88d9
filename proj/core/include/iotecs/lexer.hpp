// Tokenizer for the .iotecs surface syntax.
#pragma once

#include "iotecs/diagnostics.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace iotecs {

enum class TokKind {
    Ident,   // names and keywords: Cloud, SN1, MAX, ...
    Int,     // 1883
    Scaled,  // 10s, 60B, 2G — integer immediately followed by letters
    String,  // "23C" with backslash escapes, value in bytes
    Colon,
    Comma,
    Dot,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    End,
    Invalid, // lexical error; message in text
};

struct Token {
    TokKind kind = TokKind::End;
    std::string text;           // raw spelling (or error message for Invalid)
    int64_t int_value = 0;      // Int and Scaled
    std::string suffix;         // Scaled unit letters
    std::vector<uint8_t> bytes; // String contents after unescaping
    SourceLoc loc;
};

class Lexer {
public:
    explicit Lexer(std::string_view src);

    Token next();
    const Token& peek();

    // Tokenizes everything up front; handy for tests.
    static std::vector<Token> tokenize(std::string_view src);

private:
    Token lex();
    char current() const;
    char lookahead() const;
    void advance();
    bool at_end() const;
    Token make(TokKind kind, SourceLoc loc, std::string text = {});

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
    bool has_peek_ = false;
    Token peek_;
};

} // namespace iotecs
