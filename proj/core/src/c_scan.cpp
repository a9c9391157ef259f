#include "c_scan.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace rustport::cscan {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

constexpr std::array<std::string_view, 22> kOperators = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=",  "&&",  "||",  "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
};

}  // namespace

bool is_keyword(std::string_view word) {
    static const std::unordered_set<std::string_view> keywords = {
        "auto",     "break",    "case",     "char",   "const",    "continue", "default",
        "do",       "double",   "else",     "enum",   "extern",   "float",    "for",
        "goto",     "if",       "inline",   "int",    "long",     "register", "restrict",
        "return",   "short",    "signed",   "sizeof", "static",   "struct",   "switch",
        "typedef",  "union",    "unsigned", "void",   "volatile", "while",    "_Bool",
        "_Alignof", "_Alignas", "_Static_assert", "_Noreturn", "_Thread_local",
    };
    return keywords.contains(word);
}

LexResult lex(std::string_view src) {
    LexResult out;
    out.without_comments.reserve(src.size());
    std::size_t i = 0;
    bool line_start = true;  // only whitespace seen since the last newline

    auto push = [&](TokenKind kind, std::size_t begin, std::size_t end) {
        out.tokens.push_back({kind, src.substr(begin, end - begin), begin, end});
        out.without_comments.append(src.substr(begin, end - begin));
        line_start = false;
    };

    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            out.without_comments.push_back(c);
            line_start = true;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            out.without_comments.push_back(c);
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') ++i;
            out.without_comments.push_back(' ');
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
            std::size_t close = src.find("*/", i + 2);
            if (close == std::string_view::npos) {
                out.ok = false;
                out.error = "unterminated block comment";
                break;
            }
            out.without_comments.push_back(' ');
            for (std::size_t k = i; k < close; ++k) {
                if (src[k] == '\n') out.without_comments.push_back('\n');
            }
            i = close + 2;
            continue;
        }
        if (c == '#' && line_start) {
            std::size_t begin = i;
            while (i < src.size() && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
                    i += 2;
                    continue;
                }
                ++i;
            }
            push(TokenKind::preprocessor, begin, i);
            continue;
        }
        if (ident_start(c)) {
            std::size_t begin = i;
            while (i < src.size() && ident_char(src[i])) ++i;
            std::string_view word = src.substr(begin, i - begin);
            bool prefix = word == "L" || word == "u" || word == "U" || word == "u8";
            if (!(prefix && i < src.size() && (src[i] == '"' || src[i] == '\''))) {
                push(TokenKind::identifier, begin, i);
                continue;
            }
            c = src[i];
            // fall through into the literal branch with the prefix included
            char quote = c;
            ++i;
            while (i < src.size() && src[i] != quote && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < src.size()) ++i;
                ++i;
            }
            if (i >= src.size() || src[i] != quote) {
                out.ok = false;
                out.error = "unterminated literal";
                break;
            }
            ++i;
            push(quote == '"' ? TokenKind::string : TokenKind::character, begin, i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t begin = i;
            while (i < src.size()) {
                char d = src[i];
                if (ident_char(d) || d == '.') {
                    ++i;
                } else if ((d == '+' || d == '-') &&
                           (src[i - 1] == 'e' || src[i - 1] == 'E' || src[i - 1] == 'p' || src[i - 1] == 'P')) {
                    ++i;
                } else {
                    break;
                }
            }
            push(TokenKind::number, begin, i);
            continue;
        }
        if (c == '"' || c == '\'') {
            std::size_t begin = i++;
            while (i < src.size() && src[i] != c && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < src.size()) ++i;
                ++i;
            }
            if (i >= src.size() || src[i] != c) {
                out.ok = false;
                out.error = "unterminated literal";
                break;
            }
            ++i;
            push(c == '"' ? TokenKind::string : TokenKind::character, begin, i);
            continue;
        }
        std::size_t len = 1;
        for (auto op : kOperators) {
            if (src.substr(i, op.size()) == op) {
                len = op.size();
                break;
            }
        }
        push(TokenKind::punct, i, i + len);
        i += len;
    }
    return out;
}

TopLevel scan_top_level(const std::vector<Token>& tokens) {
    TopLevel out;
    const std::size_t n = tokens.size();
    std::vector<std::size_t> match(n, n);
    {
        std::vector<std::size_t> stack;
        for (std::size_t i = 0; i < n; ++i) {
            if (tokens[i].kind != TokenKind::punct) continue;
            std::string_view t = tokens[i].text;
            if (t == "(" || t == "[" || t == "{") {
                stack.push_back(i);
            } else if (t == ")" || t == "]" || t == "}") {
                char open = t == ")" ? '(' : t == "]" ? '[' : '{';
                if (stack.empty() || tokens[stack.back()].text[0] != open) {
                    out.balanced = false;
                    return out;
                }
                match[stack.back()] = i;
                match[i] = stack.back();
                stack.pop_back();
            }
        }
        if (!stack.empty()) {
            out.balanced = false;
            return out;
        }
    }

    std::size_t stmt_start = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Token& tok = tokens[i];
        if (tok.kind == TokenKind::preprocessor) {
            if (stmt_start < i) out.statements.emplace_back(stmt_start, i - 1);
            stmt_start = i + 1;
            continue;
        }
        if (tok.kind != TokenKind::punct) continue;
        if (tok.text == "(" || tok.text == "[") {
            i = match[i];
            continue;
        }
        if (tok.text == ";") {
            out.statements.emplace_back(stmt_start, i);
            stmt_start = i + 1;
            continue;
        }
        if (tok.text != "{") continue;

        bool is_function = false;
        if (i > 0 && tokens[i - 1].text == ")" && tokens[i - 1].kind == TokenKind::punct) {
            std::size_t open = match[i - 1];
            if (open > stmt_start && open > 0) {
                const Token& name = tokens[open - 1];
                is_function = name.kind == TokenKind::identifier && !is_keyword(name.text);
                if (is_function) {
                    // `= (T){...}` style initializers never reach here; a name
                    // directly after `=` is a call inside an initializer.
                    for (std::size_t k = stmt_start; k < open; ++k) {
                        if (tokens[k].text == "=") {
                            is_function = false;
                            break;
                        }
                    }
                }
                if (is_function) {
                    out.functions.push_back({std::string(name.text), stmt_start, i, match[i]});
                }
            }
        }
        std::size_t close = match[i];
        if (is_function) {
            stmt_start = close + 1;
        }
        i = close;
    }
    if (stmt_start < n) out.statements.emplace_back(stmt_start, n - 1);
    return out;
}

}  // namespace rustport::cscan
