#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rustport/buildcheck.hpp"

namespace rustport::prompt {

enum class PromptKind { base, basic_repair, guided_repair, dynamic_repair };

std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view text);

/// The eight compiler error codes that have guided-repair instructions.
const std::array<std::string_view, 8>& guided_target_codes();
bool is_guided_target(std::string_view code);

struct GuidanceCause {
    std::string explanation;
    std::string bad_snippet;
    std::string fixed_snippet;

    bool operator==(const GuidanceCause&) const = default;
};

struct GuidanceEntry {
    std::string error_code;
    std::string title;
    std::vector<GuidanceCause> causes;

    bool operator==(const GuidanceEntry&) const = default;
};

/// Parses and validates one knowledge-base file. Throws std::invalid_argument
/// when the code is not a guided target or a cause lacks a snippet.
GuidanceEntry parse_guidance(std::string_view json_text);

/// Every `*.json` in `dir`, ordered by error code.
std::vector<GuidanceEntry> load_knowledge_base(const std::filesystem::path& dir);

/// `$RUSTPORT_GUIDANCE_DIR`, else the installed data directory, else the source tree copy.
std::filesystem::path default_guidance_dir();

struct PromptOptions {
    std::size_t message_budget = 16 * 1024;  // bytes of compiler/runtime text kept (head)
};

/// Keeps the first `budget` bytes (on a UTF-8 boundary) and notes what was cut.
std::string truncate_head(std::string_view text, std::size_t budget);

std::string build_base_prompt(std::string_view c_source);

std::string build_repair_prompt(std::string_view c_source, std::string_view bad_translation,
                                std::string_view diagnostics_text, const PromptOptions& options = {});

/// Repair prompt plus the guidance entries whose codes occur among the
/// error-level diagnostics, in first-occurrence order.
std::string build_guided_prompt(std::string_view c_source, std::string_view bad_translation,
                                std::span<const build::Diagnostic> diagnostics,
                                std::span<const GuidanceEntry> knowledge_base, const PromptOptions& options = {});

/// Entries build_guided_prompt would embed, in order.
std::vector<const GuidanceEntry*> select_guidance(std::span<const build::Diagnostic> diagnostics,
                                                  std::span<const GuidanceEntry> knowledge_base);

std::string render_guidance(const GuidanceEntry& entry);

enum class DynamicErrorType { runtime, infinite_loop, test_case };

std::string_view describe(DynamicErrorType type);  // "runtime", "infinite loop", "test case"

std::string build_dynamic_prompt(std::string_view c_source, std::string_view bad_translation,
                                 DynamicErrorType error_type, std::string_view error_message,
                                 const PromptOptions& options = {});

}  // namespace rustport::prompt
