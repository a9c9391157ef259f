#include "rustport/exec_validate.hpp"

#include <cstdio>
#include <regex>
#include <unistd.h>

#include "rustport/process.hpp"

namespace fs = std::filesystem;

namespace rustport::exec {

namespace {

constexpr std::size_t kExcerpt = 2048;

std::string excerpt(std::string_view text) {
    if (text.size() <= kExcerpt) return std::string(text);
    return std::string(text.substr(0, kExcerpt)) + "\n... (" + std::to_string(text.size() - kExcerpt) +
           " more bytes)";
}

// Panic headers carry the OS thread id, e.g. "thread 'main' (5681) panicked".
std::string scrub(std::string text) {
    static const std::regex tid(R"((thread '[^']*') \(\d+\))");
    return std::regex_replace(text, tid, "$1");
}

}  // namespace

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::pass: return "pass";
        case Verdict::runtime_error: return "runtime_error";
        case Verdict::infinite_loop: return "infinite_loop";
        case Verdict::test_case_error: return "test_case_error";
    }
    return "runtime_error";
}

Verdict verdict_from_string(std::string_view text) {
    if (text == "pass") return Verdict::pass;
    if (text == "runtime_error") return Verdict::runtime_error;
    if (text == "infinite_loop") return Verdict::infinite_loop;
    if (text == "test_case_error") return Verdict::test_case_error;
    throw std::invalid_argument("unknown verdict: " + std::string(text));
}

void ExecLimits::validate() const {
    if (wall_timeout.count() <= 0 || memory_cap == 0 || output_cap == 0) {
        throw std::invalid_argument("exec limits must all be positive");
    }
}

std::string timeout_notice(std::chrono::milliseconds wall_timeout) {
    char buf[64];
    double secs = static_cast<double>(wall_timeout.count()) / 1000.0;
    if (wall_timeout.count() % 1000 == 0) std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(secs));
    else std::snprintf(buf, sizeof buf, "%g", secs);
    return std::string("the program did not terminate within ") + buf + " seconds";
}

std::string normalize_output(std::string_view text) {
    std::vector<std::string> lines;
    std::string line;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            lines.push_back(std::move(line));
            line.clear();
        } else if (c == '\n') {
            lines.push_back(std::move(line));
            line.clear();
        } else {
            line.push_back(c);
        }
    }
    lines.push_back(std::move(line));
    for (auto& l : lines) {
        while (!l.empty() && (l.back() == ' ' || l.back() == '\t' || l.back() == '\f' || l.back() == '\v')) {
            l.pop_back();
        }
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

bool compare_output(std::string_view actual, std::string_view expected) {
    return normalize_output(actual) == normalize_output(expected);
}

ValidationResult run_tests(const fs::path& binary, std::span<const corpus::TestCase> cases,
                           const ExecLimits& limits) {
    limits.validate();
    if (!fs::is_regular_file(binary) || ::access(binary.c_str(), X_OK) != 0) {
        throw BinaryMissing("binary missing or not executable: " + binary.string());
    }

    ValidationResult result;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        ProcessSpec spec;
        spec.argv = {fs::absolute(binary).string()};
        spec.stdin_data = cases[i].input;
        spec.wall_timeout = limits.wall_timeout;
        spec.memory_cap = limits.memory_cap;
        spec.output_cap = limits.output_cap;
        spec.extra_env = {"RUST_BACKTRACE=0"};
        ProcessResult proc = run_process(spec);
        proc.stderr_text = scrub(std::move(proc.stderr_text));

        CaseRun run;
        run.duration = proc.duration;
        run.termination = {proc.exit_code, proc.signal, proc.timed_out, proc.output_truncated};

        if (!proc.launched) {
            run.status = Verdict::runtime_error;
            result.detail = proc.stderr_text;
        } else if (proc.timed_out) {
            run.status = Verdict::infinite_loop;
            result.detail = timeout_notice(limits.wall_timeout);
        } else if (proc.output_truncated) {
            run.status = Verdict::runtime_error;
            result.detail = "output limit exceeded (" + std::to_string(limits.output_cap) + " bytes)";
        } else if (proc.signal != 0) {
            run.status = Verdict::runtime_error;
            result.detail = "process terminated by " + signal_name(proc.signal);
            if (!proc.stderr_text.empty()) result.detail += "\n" + excerpt(proc.stderr_text);
        } else if (proc.exit_code != 0) {
            run.status = Verdict::runtime_error;
            result.detail = excerpt(proc.stderr_text);
            if (result.detail.empty()) result.detail = "process exited with status " + std::to_string(proc.exit_code);
        } else if (!compare_output(proc.stdout_text, cases[i].expected_output)) {
            run.status = Verdict::test_case_error;
            result.detail = "Test case " + std::to_string(i + 1) + " failed.\nInput:\n" + excerpt(cases[i].input) +
                            "\nExpected output:\n" + excerpt(cases[i].expected_output) + "\nActual output:\n" +
                            excerpt(proc.stdout_text);
        } else {
            run.status = Verdict::pass;
        }
        result.per_case.push_back(run);
        if (run.status != Verdict::pass) {
            result.verdict = run.status;
            result.failing_case = i;
            return result;
        }
    }
    result.verdict = Verdict::pass;
    return result;
}

}  // namespace rustport::exec
