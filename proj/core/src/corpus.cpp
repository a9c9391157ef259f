#include "rustport/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "c_scan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rustport::corpus {

namespace {

using cscan::Token;
using cscan::TokenKind;

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Numeric stems first in numeric order, then the rest lexicographically.
bool stem_less(const std::string& a, const std::string& b) {
    bool da = all_digits(a), db = all_digits(b);
    if (da != db) return da;
    if (da && a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

std::optional<Coverage> read_coverage(const fs::path& meta, std::vector<LoadWarning>& warnings,
                                      const std::string& id) {
    auto text = read_file(meta);
    if (!text) return std::nullopt;
    try {
        json j = json::parse(*text);
        if (!j.contains("coverage")) return std::nullopt;
        Coverage cov;
        const json& c = j.at("coverage");
        if (c.contains("lines")) cov.line_ratio = c.at("lines").get<double>();
        if (c.contains("functions")) cov.function_ratio = c.at("functions").get<double>();
        return cov;
    } catch (const json::exception& e) {
        warnings.push_back({id, std::string("ignoring malformed meta.json: ") + e.what()});
        return std::nullopt;
    }
}

const std::unordered_set<std::string_view>& type_keywords() {
    static const std::unordered_set<std::string_view> set = {
        "void", "char", "short", "int", "long", "float", "double", "signed",
        "unsigned", "_Bool", "bool", "const", "volatile", "restrict",
    };
    return set;
}

const std::unordered_set<std::string_view>& library_type_names() {
    static const std::unordered_set<std::string_view> set = {
        "size_t",  "ssize_t",  "ptrdiff_t", "FILE",     "wchar_t",  "intptr_t", "uintptr_t",
        "int8_t",  "int16_t",  "int32_t",   "int64_t",  "uint8_t",  "uint16_t", "uint32_t",
        "uint64_t", "intmax_t", "uintmax_t",
    };
    return set;
}

bool is_punct(const Token& t, std::string_view text) {
    return t.kind == TokenKind::punct && t.text == text;
}

}  // namespace

const SourceProgram* Corpus::find(std::string_view id) const {
    auto it = std::lower_bound(programs.begin(), programs.end(), id,
                               [](const SourceProgram& p, std::string_view v) { return p.id < v; });
    if (it == programs.end() || it->id != id) return nullptr;
    return &*it;
}

Corpus load_corpus(const fs::path& root, const LoadOptions& options) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw CorpusError("corpus root is not a readable directory: " + root.string());
    }
    fs::directory_iterator it(root, ec);
    if (ec) throw CorpusError("cannot read corpus root " + root.string() + ": " + ec.message());

    std::vector<fs::path> dirs;
    for (const auto& entry : it) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());

    Corpus corpus;
    for (const auto& dir : dirs) {
        std::string id = dir.filename().string();
        auto source = read_file(dir / "main.c");
        if (!source) {
            corpus.warnings.push_back({id, "missing or unreadable main.c"});
            continue;
        }
        if (source->empty()) {
            corpus.warnings.push_back({id, "empty main.c"});
            continue;
        }

        std::map<std::string, std::pair<std::optional<fs::path>, std::optional<fs::path>>> stems;
        fs::path tests = dir / "tests";
        if (fs::is_directory(tests, ec)) {
            for (const auto& entry : fs::directory_iterator(tests, ec)) {
                if (!entry.is_regular_file()) continue;
                auto ext = entry.path().extension().string();
                auto stem = entry.path().stem().string();
                if (ext == ".in") stems[stem].first = entry.path();
                else if (ext == ".out") stems[stem].second = entry.path();
            }
        }
        std::vector<std::string> order;
        for (const auto& [stem, files] : stems) order.push_back(stem);
        std::sort(order.begin(), order.end(), stem_less);

        SourceProgram program;
        program.id = id;
        bool malformed = false;
        for (const auto& stem : order) {
            const auto& [in, out] = stems[stem];
            if (!out) {
                corpus.warnings.push_back({id, "test " + stem + " has no .out file; skipped"});
                continue;
            }
            TestCase tc;
            if (in) {
                auto data = read_file(*in);
                if (!data) {
                    malformed = true;
                    break;
                }
                tc.input = std::move(*data);
            }
            auto expected = read_file(*out);
            if (!expected) {
                malformed = true;
                break;
            }
            tc.expected_output = std::move(*expected);
            program.test_cases.push_back(std::move(tc));
        }
        if (malformed) {
            corpus.warnings.push_back({id, "unreadable test file"});
            continue;
        }
        if (program.test_cases.empty()) {
            corpus.warnings.push_back({id, "no test cases; excluded"});
            continue;
        }

        program.source_text = std::move(*source);
        if (options.strip_dead_functions) {
            StripResult stripped = strip_dead_functions(program.source_text);
            if (stripped.warning) {
                corpus.warnings.push_back({id, "dead-function removal skipped: " + stripped.reason});
            }
            program.source_text = std::move(stripped.text);
        }
        program.metrics = extract_code_metrics(program.source_text);
        program.coverage = read_coverage(dir / "meta.json", corpus.warnings, id);
        corpus.programs.push_back(std::move(program));
    }
    std::sort(corpus.programs.begin(), corpus.programs.end(),
              [](const SourceProgram& a, const SourceProgram& b) { return a.id < b.id; });
    return corpus;
}

void save_corpus(const fs::path& root, std::span<const SourceProgram> programs) {
    fs::create_directories(root);
    for (const auto& program : programs) {
        fs::path dir = root / program.id;
        fs::create_directories(dir / "tests");
        write_file(dir / "main.c", program.source_text);
        for (std::size_t i = 0; i < program.test_cases.size(); ++i) {
            std::string stem = std::to_string(i + 1);
            write_file(dir / "tests" / (stem + ".in"), program.test_cases[i].input);
            write_file(dir / "tests" / (stem + ".out"), program.test_cases[i].expected_output);
        }
        if (program.coverage) {
            json cov = json::object();
            if (program.coverage->line_ratio) cov["lines"] = *program.coverage->line_ratio;
            if (program.coverage->function_ratio) cov["functions"] = *program.coverage->function_ratio;
            write_file(dir / "meta.json", json{{"coverage", cov}}.dump(2) + "\n");
        }
    }
}

StripResult strip_dead_functions(std::string_view source_text) {
    StripResult result;
    result.text = std::string(source_text);

    cscan::LexResult lexed = cscan::lex(source_text);
    if (!lexed.ok) {
        result.warning = true;
        result.reason = lexed.error;
        return result;
    }
    cscan::TopLevel top = cscan::scan_top_level(lexed.tokens);
    if (!top.balanced) {
        result.warning = true;
        result.reason = "unbalanced brackets";
        return result;
    }
    const auto& tokens = lexed.tokens;

    std::unordered_map<std::string, std::vector<std::size_t>> by_name;
    for (std::size_t i = 0; i < top.functions.size(); ++i) {
        by_name[top.functions[i].name].push_back(i);
    }
    if (!by_name.contains("main")) {
        result.warning = true;
        result.reason = "no entry point";
        return result;
    }

    std::vector<std::string> worklist{"main"};
    std::unordered_set<std::string> live{"main"};
    auto mark = [&](std::string_view name) {
        auto key = std::string(name);
        if (by_name.contains(key) && live.insert(key).second) worklist.push_back(key);
    };
    for (const auto& [first, last] : top.statements) {
        bool after_init = false;
        for (std::size_t k = first; k <= last; ++k) {
            if (is_punct(tokens[k], "=")) after_init = true;
            if (after_init && tokens[k].kind == TokenKind::identifier) mark(tokens[k].text);
        }
    }
    while (!worklist.empty()) {
        std::string name = std::move(worklist.back());
        worklist.pop_back();
        for (std::size_t idx : by_name[name]) {
            const auto& def = top.functions[idx];
            for (std::size_t k = def.body_open + 1; k < def.body_close; ++k) {
                if (tokens[k].kind == TokenKind::identifier) mark(tokens[k].text);
            }
        }
    }

    std::string out;
    out.reserve(source_text.size());
    std::size_t cursor = 0;
    for (const auto& def : top.functions) {
        if (live.contains(def.name)) continue;
        std::size_t begin = tokens[def.first_token].begin;
        std::size_t end = tokens[def.body_close].end;
        std::size_t tail = end;
        while (tail < source_text.size() && (source_text[tail] == ' ' || source_text[tail] == '\t')) ++tail;
        if (tail < source_text.size() && source_text[tail] == '\n') end = tail + 1;
        out.append(source_text.substr(cursor, begin - cursor));
        cursor = end;
        result.removed.push_back(def.name);
    }
    out.append(source_text.substr(cursor));
    result.text = std::move(out);
    return result;
}

CodeMetrics extract_code_metrics(std::string_view source_text) {
    CodeMetrics metrics;
    cscan::LexResult lexed = cscan::lex(source_text);

    {
        std::istringstream lines(lexed.without_comments);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.find_first_not_of(" \t\r\f\v") != std::string::npos) ++metrics.loc;
        }
    }

    const auto& tokens = lexed.tokens;
    const std::size_t n = tokens.size();
    if (lexed.ok) {
        cscan::TopLevel top = cscan::scan_top_level(tokens);
        if (top.balanced) metrics.functions = top.functions.size();
    }

    std::unordered_set<std::string_view> typedef_names;
    for (std::size_t i = 0; i < n; ++i) {
        if (tokens[i].text != "typedef" || tokens[i].kind != TokenKind::identifier) continue;
        std::string_view candidate;
        int depth = 0;
        std::size_t k = i + 1;
        for (; k < n && !(depth == 0 && is_punct(tokens[k], ";")); ++k) {
            if (is_punct(tokens[k], "{")) ++depth;
            else if (is_punct(tokens[k], "}")) --depth;
            else if (depth == 0 && tokens[k].kind == TokenKind::identifier && !cscan::is_keyword(tokens[k].text)) {
                candidate = tokens[k].text;
            }
        }
        if (!candidate.empty()) typedef_names.insert(candidate);
        i = k;
    }

    // Matching brackets for cast detection; tolerant of imbalance.
    std::vector<std::size_t> match(n, n);
    {
        std::vector<std::size_t> stack;
        for (std::size_t i = 0; i < n; ++i) {
            if (is_punct(tokens[i], "(")) stack.push_back(i);
            else if (is_punct(tokens[i], ")") && !stack.empty()) {
                match[i] = stack.back();
                match[stack.back()] = i;
                stack.pop_back();
            }
        }
    }

    auto names_type = [&](std::size_t idx) {
        const Token& t = tokens[idx];
        if (t.kind != TokenKind::identifier) return false;
        if (type_keywords().contains(t.text) || library_type_names().contains(t.text) ||
            typedef_names.contains(t.text)) {
            return true;
        }
        if (idx > 0) {
            std::string_view before = tokens[idx - 1].text;
            return before == "struct" || before == "union" || before == "enum";
        }
        return false;
    };

    // For `T *a, *b`: walk back to the start of the declaration and check it opens with a type.
    auto declaration_has_type = [&](std::size_t comma) {
        int depth = 0;
        for (std::size_t k = comma; k-- > 0;) {
            const Token& t = tokens[k];
            if (is_punct(t, ")") || is_punct(t, "]") || is_punct(t, "}")) {
                ++depth;
                continue;
            }
            if (is_punct(t, "(") || is_punct(t, "[") || is_punct(t, "{")) {
                if (depth == 0) return k + 1 < comma && names_type(k + 1);
                --depth;
                continue;
            }
            if (depth == 0 && (is_punct(t, ";") || t.kind == TokenKind::preprocessor)) {
                return k + 1 < comma && names_type(k + 1);
            }
        }
        return comma > 0 && names_type(0);
    };

    auto is_operand_start = [&](std::size_t idx) {
        if (idx >= n) return false;
        const Token& t = tokens[idx];
        if (t.kind == TokenKind::identifier || t.kind == TokenKind::number || t.kind == TokenKind::string ||
            t.kind == TokenKind::character) {
            return true;
        }
        return is_punct(t, "(") || is_punct(t, "&") || is_punct(t, "*") || is_punct(t, "-") ||
               is_punct(t, "!") || is_punct(t, "~");
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Token& t = tokens[i];
        if (t.kind == TokenKind::identifier) {
            if (t.text == "struct" && i + 1 < n) {
                std::size_t next = i + 1;
                if (tokens[next].kind == TokenKind::identifier) ++next;
                if (next < n && is_punct(tokens[next], "{")) ++metrics.structs;
            }
            if ((t.text == "malloc" || t.text == "calloc" || t.text == "realloc" || t.text == "free") &&
                i + 1 < n && is_punct(tokens[i + 1], "(")) {
                ++metrics.memory_calls;
            }
            continue;
        }
        if (!is_punct(t, "*") || i == 0 || is_punct(tokens[i - 1], "*")) continue;

        std::size_t run_end = i;
        while (run_end < n && is_punct(tokens[run_end], "*")) ++run_end;
        bool declarator = names_type(i - 1) ||
                          (is_punct(tokens[i - 1], ",") && run_end < n &&
                           tokens[run_end].kind == TokenKind::identifier && declaration_has_type(i - 1));
        if (!declarator) continue;
        if (run_end < n && is_punct(tokens[run_end], ")") && match[run_end] < n) {
            std::size_t open = match[run_end];
            if (open > 0 && tokens[open - 1].text == "sizeof") continue;
            if (is_operand_start(run_end + 1)) continue;  // cast
        }
        ++metrics.pointers;
    }
    return metrics;
}

}  // namespace rustport::corpus
