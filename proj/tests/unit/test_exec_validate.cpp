#include <doctest.h>

#include <csignal>
#include <random>

#include "rustport/exec_validate.hpp"
#include "support.hpp"

using namespace rustport;
using namespace rustport::exec;
using testing_support::TempDir;
using testing_support::write_script;

namespace {

ExecLimits quick(int ms = 2000) {
    ExecLimits l;
    l.wall_timeout = std::chrono::milliseconds(ms);
    return l;
}

std::vector<corpus::TestCase> cases(std::initializer_list<std::pair<const char*, const char*>> items) {
    std::vector<corpus::TestCase> out;
    for (auto [in, out_text] : items) out.push_back({in, out_text});
    return out;
}

}  // namespace

TEST_CASE("echo binary passes matching cases") {
    TempDir dir;
    write_script(dir / "echo", "cat\n");
    auto r = run_tests(dir / "echo", cases({{"1 2\n", "1 2\n"}, {"x", "x\n"}}), quick());
    CHECK(r.verdict == Verdict::pass);
    CHECK_FALSE(r.failing_case);
    CHECK(r.per_case.size() == 2);
}

TEST_CASE("panic text becomes runtime_error detail") {
    TempDir dir;
    write_script(dir / "panic",
                 "echo \"thread 'main' panicked at src/main.rs:4:20:\" >&2\n"
                 "echo 'index out of bounds: the len is 3 but the index is 7' >&2\nexit 101\n");
    auto r = run_tests(dir / "panic", cases({{"", ""}}), quick());
    CHECK(r.verdict == Verdict::runtime_error);
    CHECK(r.failing_case == std::optional<std::size_t>(0));
    CHECK(r.detail.find("index out of bounds: the len is 3 but the index is 7") != std::string::npos);
    CHECK(r.per_case[0].termination.exit_code == 101);
}

TEST_CASE("panic detail is stable across runs") {
    TempDir dir;
    write_script(dir / "panic",
                 "echo \"thread 'main' ($$) panicked at main.rs:8:21:\" >&2\n"
                 "echo \"backtrace=$RUST_BACKTRACE\" >&2\nexit 101\n");
    auto r = run_tests(dir / "panic", cases({{"", ""}}), quick());
    CHECK(r.detail == "thread 'main' panicked at main.rs:8:21:\nbacktrace=0\n");
}

TEST_CASE("fault signal is a runtime_error naming the signal") {
    TempDir dir;
    write_script(dir / "segv", "kill -SEGV $$\n");
    auto r = run_tests(dir / "segv", cases({{"", ""}}), quick());
    CHECK(r.verdict == Verdict::runtime_error);
    CHECK(r.per_case[0].termination.signal == SIGSEGV);
    CHECK(r.detail.find("SIGSEGV") != std::string::npos);
}

TEST_CASE("busy loop is an infinite_loop with the fixed notice") {
    TempDir dir;
    write_script(dir / "spin", "while :; do :; done\n");
    auto start = std::chrono::steady_clock::now();
    auto r = run_tests(dir / "spin", cases({{"", ""}}), quick(2000));
    auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(r.verdict == Verdict::infinite_loop);
    CHECK(r.detail == timeout_notice(std::chrono::milliseconds(2000)));
    CHECK(r.detail == "the program did not terminate within 2 seconds");
    CHECK(elapsed < std::chrono::milliseconds(3000));
}

TEST_CASE("wrong output names the failing case") {
    TempDir dir;
    write_script(dir / "echo", "cat\n");
    auto r = run_tests(dir / "echo", cases({{"a\n", "a\n"}, {"b\n", "c\n"}, {"d\n", "d\n"}}), quick());
    CHECK(r.verdict == Verdict::test_case_error);
    CHECK(r.failing_case == std::optional<std::size_t>(1));
    CHECK(r.per_case.size() == 2);
    CHECK(r.detail == "Test case 2 failed.\nInput:\nb\n\nExpected output:\nc\n\nActual output:\nb\n");
}

TEST_CASE("output flood is cut off") {
    TempDir dir;
    write_script(dir / "flood", "yes\n");
    ExecLimits l = quick(5000);
    l.output_cap = 1 << 16;
    auto r = run_tests(dir / "flood", cases({{"", ""}}), l);
    CHECK(r.verdict == Verdict::runtime_error);
    CHECK(r.per_case[0].termination.output_overflow);
}

TEST_CASE("missing binary is a precondition failure") {
    CHECK_THROWS_AS(run_tests("/nonexistent/binary", cases({{"", ""}}), quick()), BinaryMissing);
}

TEST_CASE("limits must be positive") {
    ExecLimits l;
    l.wall_timeout = std::chrono::milliseconds(0);
    CHECK_THROWS_AS(l.validate(), std::invalid_argument);
}

TEST_CASE("output comparison rules") {
    CHECK(compare_output("1 2\n3\n", "1 2\n3\n"));
    CHECK(compare_output("42", "42\n"));
    CHECK(compare_output("42\r\n", "42\n"));
    CHECK(compare_output("a  \nb\t\n\n\n", "a\nb"));
    CHECK_FALSE(compare_output("1 2", "1  2"));
    CHECK_FALSE(compare_output("\n1", "1"));
    CHECK(normalize_output("x \r\ny\n\n") == "x\ny");
}

TEST_CASE("property: comparison is reflexive and symmetric") {
    std::mt19937 rng(5);
    const std::string alphabet = "ab 1\n\r\t";
    auto gen = [&] {
        std::string s;
        int n = static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
        return s;
    };
    for (int i = 0; i < 2000; ++i) {
        auto a = gen(), b = gen();
        CHECK(compare_output(a, a));
        CHECK(compare_output(a, b) == compare_output(b, a));
        CHECK(compare_output(normalize_output(a), a));
    }
}
