#include <doctest.h>

#include <algorithm>
#include <random>
#include <regex>

#include "rustport/corpus.hpp"
#include "support.hpp"

using namespace rustport::corpus;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

void add_program(const TempDir& root, const std::string& id, const std::string& source, int tests) {
    write_file(root / (id + "/main.c"), source);
    for (int i = 1; i <= tests; ++i) {
        write_file(root / (id + "/tests/" + std::to_string(i) + ".in"), std::to_string(i) + "\n");
        write_file(root / (id + "/tests/" + std::to_string(i) + ".out"), std::to_string(i * 2) + "\n");
    }
}

// Names of function definitions still present in the text.
std::vector<std::string> defined_functions(const std::string& text) {
    static const std::regex def(R"((?:^|\n)[A-Za-z_][A-Za-z0-9_ \*]*?\b([A-Za-z_][A-Za-z0-9_]*)\s*\([^;{)]*\)\s*\{)");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), def); it != std::sregex_iterator(); ++it) {
        out.push_back((*it)[1].str());
    }
    return out;
}

}  // namespace

TEST_CASE("empty corpus directory yields no programs") {
    TempDir root;
    auto c = load_corpus(root.path());
    CHECK(c.programs.empty());
    CHECK(c.warnings.empty());
}

TEST_CASE("programs load in id order with their tests") {
    TempDir root;
    add_program(root, "b", "int main(void){return 0;}\n", 2);
    add_program(root, "a", "int main(void){return 0;}\n", 1);
    auto c = load_corpus(root.path());
    REQUIRE(c.programs.size() == 2);
    CHECK(c.programs[0].id == "a");
    CHECK(c.programs[1].id == "b");
    REQUIRE(c.programs[1].test_cases.size() == 2);
    CHECK(c.programs[1].test_cases[1].input == "2\n");
    CHECK(c.programs[1].test_cases[1].expected_output == "4\n");
    CHECK(c.find("b") == &c.programs[1]);
    CHECK(c.find("zz") == nullptr);
}

TEST_CASE("program without tests is excluded with a warning") {
    TempDir root;
    add_program(root, "lonely", "int main(void){return 0;}\n", 0);
    add_program(root, "ok", "int main(void){return 0;}\n", 1);
    auto c = load_corpus(root.path());
    REQUIRE(c.programs.size() == 1);
    CHECK(c.programs[0].id == "ok");
    REQUIRE(c.warnings.size() == 1);
    CHECK(c.warnings[0].program_id == "lonely");
}

TEST_CASE("test files order numerically") {
    TempDir root;
    write_file(root / "p/main.c", "int main(void){return 0;}\n");
    for (int i : {10, 2, 1}) {
        write_file(root / ("p/tests/" + std::to_string(i) + ".in"), std::to_string(i));
        write_file(root / ("p/tests/" + std::to_string(i) + ".out"), "");
    }
    auto c = load_corpus(root.path());
    REQUIRE(c.programs.size() == 1);
    const auto& t = c.programs[0].test_cases;
    REQUIRE(t.size() == 3);
    CHECK(t[0].input == "1");
    CHECK(t[1].input == "2");
    CHECK(t[2].input == "10");
}

TEST_CASE("unreadable root is fatal") {
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus/root"), CorpusError);
}

TEST_CASE("coverage is read from meta.json") {
    TempDir root;
    add_program(root, "p", "int main(void){return 0;}\n", 1);
    write_file(root / "p/meta.json", R"({"coverage": {"lines": 0.75, "functions": 1.0}})");
    auto c = load_corpus(root.path());
    REQUIRE(c.programs[0].coverage);
    CHECK(*c.programs[0].coverage->line_ratio == doctest::Approx(0.75));
}

TEST_CASE("save and load round trip") {
    TempDir a, b;
    add_program(a, "x", "int main(void){return 0;}\n", 3);
    auto first = load_corpus(a.path());
    save_corpus(b.path(), first.programs);
    auto second = load_corpus(b.path());
    REQUIRE(second.programs.size() == 1);
    CHECK(second.programs[0].source_text == first.programs[0].source_text);
    CHECK(second.programs[0].test_cases == first.programs[0].test_cases);
}

TEST_CASE("strip removes one uncalled helper") {
    const std::string src =
        "#include <stdio.h>\n"
        "int used(int x) { return x + 1; }\n"
        "int unused(int x) { return x * 2; }\n"
        "int main(void) { printf(\"%d\\n\", used(1)); return 0; }\n";
    auto r = strip_dead_functions(src);
    CHECK_FALSE(r.warning);
    REQUIRE(r.removed == std::vector<std::string>{"unused"});
    CHECK(r.text ==
          "#include <stdio.h>\n"
          "int used(int x) { return x + 1; }\n"
          "int main(void) { printf(\"%d\\n\", used(1)); return 0; }\n");
}

TEST_CASE("strip leaves a main-only program unchanged") {
    const std::string src = "int main(void) {\n    return 0;\n}\n";
    auto r = strip_dead_functions(src);
    CHECK(r.removed.empty());
    CHECK(r.text == src);
}

TEST_CASE("strip removes mutually recursive dead pair") {
    const std::string src =
        "int ping(int n);\n"
        "int pong(int n) { return n ? ping(n - 1) : 0; }\n"
        "int ping(int n) { return n ? pong(n - 1) : 1; }\n"
        "int main(void) { return 0; }\n";
    auto r = strip_dead_functions(src);
    auto removed = r.removed;
    std::sort(removed.begin(), removed.end());
    CHECK(removed == std::vector<std::string>{"ping", "pong"});
    CHECK(r.text.find("pong(int n) {") == std::string::npos);
}

TEST_CASE("strip keeps functions referenced through pointers and initializers") {
    const std::string src =
        "int a(void) { return 1; }\n"
        "int b(void) { return 2; }\n"
        "int (*table[])(void) = { b };\n"
        "int main(void) { int (*f)(void) = a; return f() + table[0](); }\n";
    auto r = strip_dead_functions(src);
    CHECK(r.removed.empty());
}

TEST_CASE("strip without main warns and leaves text") {
    const std::string src = "int helper(void) { return 1; }\n";
    auto r = strip_dead_functions(src);
    CHECK(r.warning);
    CHECK(r.text == src);
}

TEST_CASE("property: strip is idempotent and never removes main") {
    std::mt19937 rng(7);
    for (int round = 0; round < 200; ++round) {
        const int n = 1 + static_cast<int>(rng() % 6);
        std::string src = "#include <stdio.h>\n";
        for (int i = 0; i < n; ++i) src += "int f" + std::to_string(i) + "(int x);\n";
        std::vector<std::vector<int>> calls(n);
        for (int i = 0; i < n; ++i) {
            std::string body = "    int r = x;\n";
            for (int j = 0; j < n; ++j) {
                if (rng() % 3 == 0) {
                    body += "    r += f" + std::to_string(j) + "(x - 1);\n";
                    calls[i].push_back(j);
                }
            }
            src += "int f" + std::to_string(i) + "(int x) {\n    if (x <= 0) return 0;\n" + body + "    return r;\n}\n";
        }
        std::vector<int> roots;
        std::string main_body;
        for (int i = 0; i < n; ++i) {
            if (rng() % 2 == 0) {
                main_body += "    printf(\"%d\\n\", f" + std::to_string(i) + "(3));\n";
                roots.push_back(i);
            }
        }
        src += "int main(void) {\n" + main_body + "    return 0;\n}\n";

        std::vector<bool> live(n, false);
        std::vector<int> stack = roots;
        while (!stack.empty()) {
            int f = stack.back();
            stack.pop_back();
            if (live[f]) continue;
            live[f] = true;
            for (int g : calls[f]) stack.push_back(g);
        }

        auto once = strip_dead_functions(src);
        REQUIRE_FALSE(once.warning);
        auto twice = strip_dead_functions(once.text);
        CHECK(twice.text == once.text);
        CHECK(twice.removed.empty());
        auto defs = defined_functions(once.text);
        CHECK(std::find(defs.begin(), defs.end(), "main") != defs.end());
        for (int i = 0; i < n; ++i) {
            bool present = std::find(defs.begin(), defs.end(), "f" + std::to_string(i)) != defs.end();
            CHECK(present == live[i]);
        }
    }
}

TEST_CASE("metrics of empty text are zero") { CHECK(extract_code_metrics("") == CodeMetrics{}); }

TEST_CASE("metrics count functions and pointer declarators") {
    const std::string src =
        "#include <stdlib.h>\n"
        "/* a comment\n   spanning lines */\n"
        "int sum(int *xs, int n) {\n"
        "    int s = 0;\n"
        "    for (int i = 0; i < n; i++) s += xs[i] * 2;\n"
        "    return s;\n"
        "}\n"
        "\n"
        "int main(void) {\n"
        "    char **argvish = 0;\n"
        "    int x = 3, *p = &x;\n"
        "    return sum(p, 1) + (int)sizeof(int *) * 0 + (argvish != 0);\n"
        "}\n";
    auto m = extract_code_metrics(src);
    CHECK(m.functions == 2);
    CHECK(m.pointers == 3);
    CHECK(m.loc == 11);
    CHECK(m.memory_calls == 0);
}

TEST_CASE("metrics count allocation and release calls") {
    const std::string src =
        "#include <stdlib.h>\n"
        "struct node { int v; struct node *next; };\n"
        "int main(void) {\n"
        "    struct node *n = malloc(sizeof(struct node));\n"
        "    free(n);\n"
        "    return 0;\n"
        "}\n";
    auto m = extract_code_metrics(src);
    CHECK(m.memory_calls == 2);
    CHECK(m.structs == 1);
    CHECK(m.pointers == 2);
}

TEST_CASE("property: metrics are additive over concatenated translation units") {
    std::mt19937 rng(11);
    const std::vector<std::string> pieces = {
        "int f%(int *a) { return *a; }\n",
        "void g%(char **s, int n) { (void)s; (void)n; }\n",
        "struct s% { int *p; };\n",
        "static int h%(void) { int *q = malloc(4); free(q); return 0; }\n",
        "double k%(double x) { return x * 2.0; }\n",
    };
    for (int round = 0; round < 100; ++round) {
        auto make = [&](int tag) {
            std::string out;
            int k = 1 + static_cast<int>(rng() % 4);
            for (int i = 0; i < k; ++i) {
                std::string p = pieces[rng() % pieces.size()];
                auto pos = p.find('%');
                p.replace(pos, 1, std::to_string(tag) + "_" + std::to_string(i));
                out += p;
            }
            return out;
        };
        auto a = make(1), b = make(2);
        auto ma = extract_code_metrics(a), mb = extract_code_metrics(b), mab = extract_code_metrics(a + b);
        CHECK(mab.loc == ma.loc + mb.loc);
        CHECK(mab.functions == ma.functions + mb.functions);
        CHECK(mab.pointers == ma.pointers + mb.pointers);
        CHECK(mab.structs == ma.structs + mb.structs);
        CHECK(mab.memory_calls == ma.memory_calls + mb.memory_calls);
    }
}

TEST_CASE("load with stripping records stripped source metrics") {
    TempDir root;
    add_program(root, "p",
                "int dead(void) { return 7; }\n"
                "int main(void) { return 0; }\n",
                1);
    auto plain = load_corpus(root.path());
    auto stripped = load_corpus(root.path(), {.strip_dead_functions = true});
    CHECK(plain.programs[0].metrics.functions == 2);
    CHECK(stripped.programs[0].metrics.functions == 1);
    CHECK(stripped.programs[0].source_text == "int main(void) { return 0; }\n");
}
