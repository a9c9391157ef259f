#pragma once

// Lightweight C tokenizer and top-level definition scanner shared by the
// corpus metrics and the dead-function pass. Not a C front end.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rustport::cscan {

enum class TokenKind { identifier, number, string, character, punct, preprocessor };

struct Token {
    TokenKind kind;
    std::string_view text;
    std::size_t begin;
    std::size_t end;
};

struct LexResult {
    std::vector<Token> tokens;
    std::string without_comments;  // comments replaced by one space, newlines kept
    bool ok = true;
    std::string error;
};

LexResult lex(std::string_view source);

struct FunctionDef {
    std::string name;
    std::size_t first_token;  // index of the first token of the definition
    std::size_t body_open;    // index of the `{`
    std::size_t body_close;   // index of the matching `}`
};

struct TopLevel {
    std::vector<FunctionDef> functions;
    // Token index ranges [first, last] of top-level statements that are not
    // function definitions (declarations, typedefs, global initializers).
    std::vector<std::pair<std::size_t, std::size_t>> statements;
    bool balanced = true;
};

TopLevel scan_top_level(const std::vector<Token>& tokens);

bool is_keyword(std::string_view word);

}  // namespace rustport::cscan
