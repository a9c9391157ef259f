#include <doctest.h>

#include <algorithm>
#include <cstdlib>

#include "rustport/promptkit.hpp"
#include "prompt_inputs.hpp"
#include "support.hpp"

using namespace rustport;
using namespace rustport::prompt;
namespace fs = std::filesystem;

namespace {

using prompt_inputs::kBad;
using prompt_inputs::kSource;

build::Diagnostic diag(std::optional<std::string> code, std::string message = "problem") {
    build::Diagnostic d;
    d.code = std::move(code);
    d.message = message;
    d.rendered = "error" + (d.code ? "[" + *d.code + "]" : std::string()) + ": " + message + "\n";
    return d;
}

const std::vector<GuidanceEntry>& kb() {
    static const auto entries = load_knowledge_base(default_guidance_dir());
    return entries;
}

void check_golden(const std::string& name, const std::string& actual) {
    const fs::path file = testing_support::fixtures() / "golden" / (name + ".txt");
    if (std::getenv("RUSTPORT_UPDATE_GOLDEN")) testing_support::write_file(file, actual);
    REQUIRE_MESSAGE(fs::exists(file), "missing snapshot " << file.string());
    CHECK(testing_support::read_file(file) == actual);
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("knowledge base covers the eight targets") {
    REQUIRE(kb().size() == 8);
    for (const auto& e : kb()) {
        CHECK(is_guided_target(e.error_code));
        CHECK_FALSE(e.causes.empty());
    }
    for (auto code : guided_target_codes()) {
        CHECK(std::count_if(kb().begin(), kb().end(), [&](const GuidanceEntry& e) { return e.error_code == code; }) == 1);
    }
    CHECK(is_guided_target("E0384"));
    CHECK_FALSE(is_guided_target("E0433"));
}

TEST_CASE("guidance validation") {
    CHECK_THROWS_AS(parse_guidance(R"({"error_code": "E0433", "title": "t", "causes": [
        {"explanation": "e", "bad_snippet": "a", "fixed_snippet": "b"}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_guidance(R"({"error_code": "E0384", "title": "t", "causes": [
        {"explanation": "e", "bad_snippet": "", "fixed_snippet": "b"}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_guidance("{"), std::invalid_argument);
}

TEST_CASE("base prompt for hello world carries the safe-code bullet") {
    auto p = build_base_prompt("#include <stdio.h>\nint main(void) { puts(\"hello\"); return 0; }\n");
    CHECK(p.find("- Produce only safe Rust code.") != std::string::npos);
    CHECK(p.find("- Wrap the code with ```rust") != std::string::npos);
    CHECK(p.find("puts(\"hello\")") != std::string::npos);
}

TEST_CASE("empty source is rejected") { CHECK_THROWS_AS(build_base_prompt(""), std::invalid_argument); }

TEST_CASE("base prompt snapshot") { check_golden("base", build_base_prompt(kSource)); }

TEST_CASE("repair prompt snapshot and composition") {
    auto p = build_repair_prompt(kSource, kBad, prompt_inputs::kRepairDiagnostics);
    check_golden("repair", p);
    CHECK(p.starts_with(build_base_prompt(kSource)));
    CHECK(p.find("because it is syntactically incorrect") != std::string::npos);
    CHECK(p.find(kBad) != std::string::npos);
    CHECK_THROWS_AS(build_repair_prompt(kSource, kBad, ""), std::invalid_argument);
}

TEST_CASE("guided prompt for E0384 embeds only that entry") {
    std::vector<build::Diagnostic> d{prompt_inputs::guided_diagnostic()};
    auto p = build_guided_prompt(kSource, kBad, d, kb());
    check_golden("guided_E0384", p);
    CHECK(p.find("Error E0384") != std::string::npos);
    CHECK(p.find("//Cause:") != std::string::npos);
    CHECK(p.find("//Fix:") != std::string::npos);
    for (auto code : guided_target_codes()) {
        if (code != "E0384") CHECK(p.find("Error " + std::string(code)) == std::string::npos);
    }
}

TEST_CASE("guided prompt keeps diagnostic order") {
    std::vector<build::Diagnostic> d{diag("E0499"), diag("E0433"), diag("E0384"), diag("E0499")};
    auto p = build_guided_prompt(kSource, kBad, d, kb());
    check_golden("guided_E0499_E0384", p);
    auto a = p.find("Error E0499"), b = p.find("Error E0384");
    REQUIRE(a != std::string::npos);
    REQUIRE(b != std::string::npos);
    CHECK(a < b);
    CHECK(count(p, "Error E0499 (") == 1);
    auto sel = select_guidance(d, kb());
    REQUIRE(sel.size() == 2);
    CHECK(sel[0]->error_code == "E0499");
    CHECK(sel[1]->error_code == "E0384");
}

TEST_CASE("guided prompt without a targeted code is rejected") {
    std::vector<build::Diagnostic> d{diag("E0433")};
    CHECK_THROWS_AS(build_guided_prompt(kSource, kBad, d, kb()), std::invalid_argument);
}

TEST_CASE("dynamic prompts") {
    const std::string& diff = prompt_inputs::kTestCaseDiff;
    auto t = build_dynamic_prompt(kSource, kBad, DynamicErrorType::test_case, diff);
    check_golden("dynamic_test_case", t);
    CHECK(t.find("gives the following test case error") != std::string::npos);
    CHECK(t.find(diff) != std::string::npos);

    auto loop = build_dynamic_prompt(kSource, kBad, DynamicErrorType::infinite_loop, prompt_inputs::kTimeoutNotice);
    check_golden("dynamic_infinite_loop", loop);
    CHECK(loop.find("gives the following infinite loop error") != std::string::npos);

    const std::string panic = "thread 'main' panicked at src/main.rs:4:20:\nattempt to multiply with overflow";
    auto rt = build_dynamic_prompt(kSource, kBad, DynamicErrorType::runtime, panic);
    CHECK(rt.find("gives the following runtime error") != std::string::npos);
    CHECK(rt.find(panic) != std::string::npos);

    CHECK_THROWS_AS(build_dynamic_prompt(kSource, kBad, DynamicErrorType::runtime, ""), std::invalid_argument);
    CHECK_NOTHROW(build_dynamic_prompt(kSource, kBad, DynamicErrorType::infinite_loop, ""));
}

TEST_CASE("long diagnostics are truncated at the head") {
    std::string big(100, 'a');
    auto t = truncate_head(big, 10);
    CHECK(t.starts_with("aaaaaaaaaa"));
    CHECK(t.size() < big.size());
    CHECK(truncate_head("short", 100) == "short");
    // Never split a UTF-8 sequence.
    auto u = truncate_head("ab\xc3\xa9", 3);
    CHECK(u.starts_with("ab"));
    CHECK(u.find('\xc3') == std::string::npos);

    PromptOptions opts;
    opts.message_budget = 64;
    auto p = build_repair_prompt(kSource, kBad, std::string(5000, 'e'), opts);
    CHECK(p.size() < build_base_prompt(kSource).size() + kBad.size() + 1000);
}
