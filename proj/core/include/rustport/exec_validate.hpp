#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rustport/corpus.hpp"

namespace rustport::exec {

enum class Verdict { pass, runtime_error, infinite_loop, test_case_error };

std::string_view to_string(Verdict verdict);
Verdict verdict_from_string(std::string_view text);

struct ExecLimits {
    std::chrono::milliseconds wall_timeout{10'000};
    std::uint64_t memory_cap = 1ull << 30;
    std::size_t output_cap = 8u << 20;

    void validate() const;  // throws std::invalid_argument unless all positive
};

/// How one execution ended; kept so that panics and fault signals stay distinguishable.
struct Termination {
    int exit_code = -1;
    int signal = 0;
    bool timed_out = false;
    bool output_overflow = false;

    bool operator==(const Termination&) const = default;
};

struct CaseRun {
    Verdict status = Verdict::pass;
    Termination termination;
    std::chrono::milliseconds duration{0};
};

struct ValidationResult {
    Verdict verdict = Verdict::pass;
    std::optional<std::size_t> failing_case;  // zero-based
    std::string detail;                       // panic text, timeout notice or output diff
    std::vector<CaseRun> per_case;
};

class BinaryMissing : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Runs `binary` once per case in order, feeding the input on stdin, and stops
/// at the first failing case.
ValidationResult run_tests(const std::filesystem::path& binary, std::span<const corpus::TestCase> cases,
                           const ExecLimits& limits);

/// Unifies line endings, strips trailing whitespace per line and trailing blank lines.
std::string normalize_output(std::string_view text);

bool compare_output(std::string_view actual, std::string_view expected);

/// Fixed text used when a run is killed at the wall-clock limit.
std::string timeout_notice(std::chrono::milliseconds wall_timeout);

}  // namespace rustport::exec
