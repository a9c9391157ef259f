#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rustport/corpus.hpp"
#include "rustport/exec_validate.hpp"

namespace rustport::vuln {

enum class VulnType {
    buffer_overflow,
    array_bounds,
    arithmetic_overflow,
    null_deref,
    div_by_zero,
    vla_overflow,
    forgotten_memory,
    invalid_pointer,
    invalidated_object,
    invalid_free,
    misaligned_access,
    other,
};

std::string_view to_string(VulnType type);
VulnType vuln_type_from_string(std::string_view text);

/// Case-insensitive mapping from a checker violation message to a category; never fails.
VulnType classify_finding(std::string_view raw_line);

struct Finding {
    VulnType vuln_type = VulnType::other;
    std::string location;                      // file:line
    std::optional<std::string> trigger_input;  // stdin bytes that reach the violation
    std::string raw;                           // violation text as printed by the checker
};

enum class VerificationKind { failed, successful, scan_error };

std::string_view to_string(VerificationKind kind);
VerificationKind verification_kind_from_string(std::string_view text);

struct VerificationOutcome {
    VerificationKind kind = VerificationKind::scan_error;
    std::vector<Finding> findings;  // non-empty iff kind == failed
    std::chrono::milliseconds duration{0};
    std::string detail;             // reason for scan errors
};

struct CheckerConfig {
    std::string command = "esbmc";
    std::vector<std::string> args{"--overflow-check", "--unwind", "1", "--no-unwinding-assertions",
                                  "--multi-property"};
    std::chrono::milliseconds timeout{30'000};
};

class CheckerUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

bool checker_available(const CheckerConfig& config);

/// Runs the bounded model checker on the program source inside `workdir`.
/// Throws CheckerUnavailable when the checker executable cannot be started.
VerificationOutcome verify_c_program(const corpus::SourceProgram& program, const CheckerConfig& config,
                                     const std::filesystem::path& workdir);

/// Maps checker output to an outcome. `c_source` is used to recognise input
/// statements when deriving trigger inputs from counterexample traces.
VerificationOutcome parse_checker_output(std::string_view output, std::string_view c_source);

// ---------------------------------------------------------------- replay

struct CBuildConfig {
    std::string compiler = "gcc";
    std::vector<std::string> plain_flags{"-O0", "-w"};
    std::vector<std::string> instrumented_flags{"-O0", "-w", "-g", "-fsanitize=address,undefined",
                                                "-fno-sanitize-recover=all", "-fno-omit-frame-pointer"};
    std::vector<std::string> libs{"-lm"};
    std::chrono::milliseconds timeout{60'000};
};

struct CBinaries {
    std::filesystem::path plain;
    std::optional<std::filesystem::path> instrumented;  // absent when the toolchain lacks sanitizers
};

/// Builds the plain binary (required) and a sanitizer-instrumented one (best effort).
CBinaries build_c_binaries(std::string_view c_source, const std::filesystem::path& dir, const CBuildConfig& config = {});

struct PanicSignature {
    int exit_code = 101;
    std::string marker = "panicked";
};

struct Behavior {
    bool ran = false;
    exec::Termination termination;
    std::string stdout_text;
    std::string stderr_text;
    bool sanitizer_report = false;

    std::string summary() const;
};

enum class MitigationKind { mitigated_panic, mitigated_graceful, not_triggered, still_vulnerable, inconclusive };

std::string_view to_string(MitigationKind kind);
MitigationKind mitigation_kind_from_string(std::string_view text);

struct MitigationVerdict {
    MitigationKind kind = MitigationKind::inconclusive;
    std::string c_behavior;
    std::string translated_behavior;
    std::string c_build;  // "plain" or "instrumented"
    std::string reason;
    Behavior c;
    Behavior translated;
};

/// Applies the verdict table to two recorded behaviours.
MitigationKind classify_mitigation(const Behavior& c, const Behavior& translated, const PanicSignature& panic = {});

struct ReplayOptions {
    exec::ExecLimits limits;
    PanicSignature panic;
};

/// Feeds the same trigger to the C and translated binaries and classifies the pair.
/// The instrumented C build is consulted when the plain build behaves normally.
MitigationVerdict replay_mitigation(const CBinaries& c_binaries, const std::filesystem::path& translated_binary,
                                    const std::optional<std::string>& trigger, const ReplayOptions& options = {});

/// vuln_type x verdict counts; each row sums to that type's finding count.
struct ContingencyTable {
    std::map<VulnType, std::map<MitigationKind, std::size_t>> cells;

    void add(VulnType type, MitigationKind kind) { ++cells[type][kind]; }
    std::size_t row_total(VulnType type) const;
};

}  // namespace rustport::vuln
