#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rustport::corpus {

struct TestCase {
    std::string input;
    std::string expected_output;

    bool operator==(const TestCase&) const = default;
};

struct CodeMetrics {
    std::size_t loc = 0;
    std::size_t functions = 0;
    std::size_t pointers = 0;
    std::size_t structs = 0;
    std::size_t memory_calls = 0;

    bool operator==(const CodeMetrics&) const = default;
};

/// Precomputed test-suite coverage, read from `meta.json` when present.
struct Coverage {
    std::optional<double> line_ratio;
    std::optional<double> function_ratio;

    bool operator==(const Coverage&) const = default;
};

struct SourceProgram {
    std::string id;
    std::string source_text;
    std::vector<TestCase> test_cases;
    CodeMetrics metrics;
    std::optional<Coverage> coverage;
};

struct LoadWarning {
    std::string program_id;
    std::string message;
};

struct Corpus {
    std::vector<SourceProgram> programs;  // sorted by id
    std::vector<LoadWarning> warnings;

    const SourceProgram* find(std::string_view id) const;
};

struct LoadOptions {
    bool strip_dead_functions = false;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads `<root>/<id>/main.c` and `<root>/<id>/tests/<n>.{in,out}`.
/// Directories without a usable source or without any test case are skipped
/// and reported in `warnings`. Throws CorpusError when root cannot be read.
Corpus load_corpus(const std::filesystem::path& root, const LoadOptions& options = {});

/// Writes programs back in the layout load_corpus reads.
void save_corpus(const std::filesystem::path& root, std::span<const SourceProgram> programs);

struct StripResult {
    std::string text;
    std::vector<std::string> removed;  // names, in source order
    bool warning = false;              // input could not be analysed; text returned unchanged
    std::string reason;
};

/// Removes top-level function definitions that are unreachable from `main`
/// through the static call graph. Any mention of a function name inside a
/// reachable body (calls and address-taken uses alike) keeps it alive, as does
/// a mention inside a global initializer.
StripResult strip_dead_functions(std::string_view source_text);

/// Token-scan approximations:
///   loc          non-blank lines after comments are removed
///   functions    top-level function definitions
///   pointers     `*` runs in declarator position (after a type keyword,
///                typedef name or struct/union/enum tag; casts excluded)
///   structs      struct definitions (`struct [tag] {`)
///   memory_calls call sites of malloc, calloc, realloc and free
CodeMetrics extract_code_metrics(std::string_view source_text);

}  // namespace rustport::corpus
