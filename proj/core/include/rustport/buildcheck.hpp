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

namespace rustport::build {

enum class Level { error, warning };

struct Diagnostic {
    std::optional<std::string> code;  // `E` + 4 digits when the compiler assigned one
    Level level = Level::error;
    std::string message;
    std::string rendered;

    bool operator==(const Diagnostic&) const = default;
};

enum class CompileStatus { success, failure };

struct CompileResult {
    CompileStatus status = CompileStatus::failure;
    std::optional<std::filesystem::path> binary_path;
    std::vector<Diagnostic> diagnostics;
    std::chrono::milliseconds duration{0};

    bool ok() const { return status == CompileStatus::success; }
    std::vector<Diagnostic> errors() const;
};

struct CompilerConfig {
    std::vector<std::string> command{"rustc", "--edition", "2021", "--error-format=json", "-O"};
    std::chrono::milliseconds timeout{60'000};
    std::string source_name = "main.rs";
    std::string binary_name = "main";
};

/// The configured compiler executable could not be started.
class CompilerMissing : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes `translation` into a fresh `workdir` and compiles it there.
/// Throws std::logic_error if `workdir` already holds files.
CompileResult compile(std::string_view translation, const std::filesystem::path& workdir,
                      const CompilerConfig& config = {});

/// Parses the human-readable diagnostic stream (`error[E0308]: ...` headers).
std::vector<Diagnostic> parse_diagnostics(std::string_view raw_output);

/// Parses the machine-readable stream produced by `--error-format=json`.
/// Lines that are not JSON diagnostics are ignored.
std::vector<Diagnostic> parse_json_diagnostics(std::string_view json_stream);

/// Concatenated human-readable text of the error-level diagnostics.
std::string render_errors(std::span<const Diagnostic> diagnostics);

std::vector<std::string> error_codes(std::span<const Diagnostic> diagnostics);

bool is_error_code(std::string_view text);

/// Occurrences of the `unsafe` keyword outside comments and literals.
std::size_t count_unsafe_blocks(std::string_view translation);

/// Descriptions of the compiler error codes most often produced by translated programs.
class ErrorCatalogue {
public:
    static const ErrorCatalogue& standard();

    std::optional<std::string_view> describe(std::string_view code) const;
    bool contains(std::string_view code) const { return describe(code).has_value(); }
    const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

private:
    ErrorCatalogue();
    std::map<std::string, std::string, std::less<>> entries_;
};

struct CodeTally {
    std::map<std::string, std::size_t> known;
    std::map<std::string, std::size_t> unknown;  // coded, but not in the catalogue
    std::size_t uncoded = 0;
};

CodeTally tally_codes(std::span<const Diagnostic> diagnostics, const ErrorCatalogue& catalogue);

}  // namespace rustport::build
