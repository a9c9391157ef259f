#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "rustport/buildcheck.hpp"
#include "rustport/corpus.hpp"
#include "rustport/exec_validate.hpp"
#include "rustport/llm_gateway.hpp"
#include "rustport/promptkit.hpp"

namespace rustport::pipeline {

enum class OutcomeKind { success, generation_error, compilation_error, runtime_error, infinite_loop, test_case_error };

inline constexpr std::array<OutcomeKind, 6> kAllOutcomes = {
    OutcomeKind::success,       OutcomeKind::generation_error, OutcomeKind::compilation_error,
    OutcomeKind::runtime_error, OutcomeKind::infinite_loop,    OutcomeKind::test_case_error,
};

std::string_view to_string(OutcomeKind kind);
OutcomeKind outcome_from_string(std::string_view text);

enum class Phase { base, basic_repair, guided_repair, dynamic_repair };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view text);

struct Attempt {
    Phase phase = Phase::base;
    prompt::PromptKind prompt_kind = prompt::PromptKind::base;
    llm::GenerationParams params;
    std::string prompt;
    std::string response;
    llm::FinishReason finish_reason = llm::FinishReason::complete;
    std::string backend_error;
    llm::Extraction extraction;
    std::optional<build::CompileResult> compile;
    std::optional<exec::ValidationResult> validation;

    const std::string* code() const { return std::get_if<std::string>(&extraction); }
};

struct IterationCounts {
    int base = 0;
    int basic_repair = 0;
    int guided_repair = 0;
    int dynamic_repair = 0;

    int total() const { return base + basic_repair + guided_repair + dynamic_repair; }
    bool operator==(const IterationCounts&) const = default;
};

struct Transcript {
    std::string program_id;
    corpus::CodeMetrics metrics;
    std::vector<Attempt> attempts;
    OutcomeKind outcome = OutcomeKind::generation_error;
    IterationCounts iterations;
};

/// Classifies a transcript from its last compile/validation records alone.
OutcomeKind classify_final(const Transcript& transcript);

/// True iff the error codes intersect the guided-repair target set.
bool select_guided_phase(std::span<const build::Diagnostic> diagnostics);

struct PipelineConfig {
    int max_basic_repairs = 5;
    int max_guided_repairs = 5;
    int max_dynamic_repairs = 5;
    double base_temperature = 0.2;
    double repair_temperature = 0.6;
    build::CompilerConfig compiler;
    exec::ExecLimits limits;
    prompt::PromptOptions prompt_options;

    /// Stable digest over every setting that influences transcripts, the
    /// knowledge base contents and the backend name.
    std::string digest(std::span<const prompt::GuidanceEntry> knowledge_base, std::string_view backend) const;
};

/// Reads `{"max_basic_repairs": 5, ...}`; absent keys keep their defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig parse_pipeline_config(std::string_view json_text);

/// Receives transcript records as they are produced.
class TranscriptSink {
public:
    virtual ~TranscriptSink() = default;
    virtual void begin(const std::string& program_id, const corpus::CodeMetrics& metrics) = 0;
    virtual void attempt(std::size_t index, const Attempt& attempt) = 0;
    virtual void compiled(std::size_t index, const build::CompileResult& result) = 0;
    virtual void validated(std::size_t index, const exec::ValidationResult& result) = 0;
    virtual void finish(OutcomeKind outcome, const IterationCounts& counts) = 0;
};

/// Append-only `transcript.jsonl` writer (one flushed line per record) plus a
/// `timing.jsonl` side file holding wall-clock durations.
class JsonlTranscriptWriter final : public TranscriptSink {
public:
    JsonlTranscriptWriter(std::filesystem::path program_dir, std::string config_digest);
    void begin(const std::string& program_id, const corpus::CodeMetrics& metrics) override;
    void attempt(std::size_t index, const Attempt& attempt) override;
    void compiled(std::size_t index, const build::CompileResult& result) override;
    void validated(std::size_t index, const exec::ValidationResult& result) override;
    void finish(OutcomeKind outcome, const IterationCounts& counts) override;

private:
    void append(const std::filesystem::path& file, const std::string& line);
    std::filesystem::path dir_;
    std::string digest_;
};

class TranscriptFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StoredTranscript {
    Transcript transcript;
    std::string config_digest;
    bool complete = false;  // ends with an outcome record
};

StoredTranscript read_transcript(const std::filesystem::path& transcript_file);

struct PipelineContext {
    const PipelineConfig& config;
    std::span<const prompt::GuidanceEntry> knowledge_base;
    std::filesystem::path program_dir;  // attempt workdirs are created below it
    TranscriptSink* sink = nullptr;
};

/// Runs transpile, compile, basic repair, guided repair, validation and
/// dynamic repair for one program under the configured iteration caps.
Transcript translate_program(const corpus::SourceProgram& program, llm::Gateway& gateway, const PipelineContext& ctx);

struct CampaignState {
    std::string run_id;
    std::string backend;
    std::set<std::string> completed;
    std::string config_digest;
};

class CampaignError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CampaignOptions {
    std::filesystem::path run_dir;
    std::size_t workers = 1;
    bool resume = false;
    std::stop_token stop;                               // checked between programs
    std::function<void(const Transcript&)> on_complete;  // called serially
};

struct CampaignResult {
    CampaignState state;
    std::vector<Transcript> transcripts;  // every completed program, sorted by id
    std::size_t executed = 0;             // programs translated by this invocation
    bool finished = false;                // every corpus program is completed
};

CampaignResult run_campaign(const corpus::Corpus& corpus, llm::Gateway& gateway, const PipelineConfig& config,
                            std::span<const prompt::GuidanceEntry> knowledge_base, const CampaignOptions& options);

CampaignState read_state(const std::filesystem::path& state_file);
void write_state(const std::filesystem::path& state_file, const CampaignState& state);

/// Removes state and per-program records from a run directory.
void reset_run(const std::filesystem::path& run_dir);

/// Loads every complete transcript below a run directory, sorted by id.
std::vector<Transcript> load_run(const std::filesystem::path& run_dir);

}  // namespace rustport::pipeline
