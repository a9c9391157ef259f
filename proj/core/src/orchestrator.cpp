#include "rustport/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rustport/digest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rustport::pipeline {

// ---------------------------------------------------------------- enums

std::string_view to_string(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::success: return "success";
        case OutcomeKind::generation_error: return "generation_error";
        case OutcomeKind::compilation_error: return "compilation_error";
        case OutcomeKind::runtime_error: return "runtime_error";
        case OutcomeKind::infinite_loop: return "infinite_loop";
        case OutcomeKind::test_case_error: return "test_case_error";
    }
    return "generation_error";
}

OutcomeKind outcome_from_string(std::string_view text) {
    for (auto k : kAllOutcomes) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown outcome: " + std::string(text));
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::base: return "base";
        case Phase::basic_repair: return "basic_repair";
        case Phase::guided_repair: return "guided_repair";
        case Phase::dynamic_repair: return "dynamic_repair";
    }
    return "base";
}

Phase phase_from_string(std::string_view text) {
    for (auto p : {Phase::base, Phase::basic_repair, Phase::guided_repair, Phase::dynamic_repair}) {
        if (to_string(p) == text) return p;
    }
    throw std::invalid_argument("unknown phase: " + std::string(text));
}

bool select_guided_phase(std::span<const build::Diagnostic> diagnostics) {
    return std::any_of(diagnostics.begin(), diagnostics.end(), [](const build::Diagnostic& d) {
        return d.level == build::Level::error && d.code && prompt::is_guided_target(*d.code);
    });
}

namespace {

OutcomeKind outcome_for(exec::Verdict verdict) {
    switch (verdict) {
        case exec::Verdict::pass: return OutcomeKind::success;
        case exec::Verdict::runtime_error: return OutcomeKind::runtime_error;
        case exec::Verdict::infinite_loop: return OutcomeKind::infinite_loop;
        case exec::Verdict::test_case_error: return OutcomeKind::test_case_error;
    }
    return OutcomeKind::runtime_error;
}

}  // namespace

OutcomeKind classify_final(const Transcript& transcript) {
    for (auto it = transcript.attempts.rbegin(); it != transcript.attempts.rend(); ++it) {
        if (!it->compile) continue;
        if (!it->compile->ok()) return OutcomeKind::compilation_error;
        if (!it->validation) return OutcomeKind::compilation_error;
        return outcome_for(it->validation->verdict);
    }
    return OutcomeKind::generation_error;
}

// ---------------------------------------------------------------- config

namespace {

json config_json(const PipelineConfig& c) {
    return {
        {"max_basic_repairs", c.max_basic_repairs},
        {"max_guided_repairs", c.max_guided_repairs},
        {"max_dynamic_repairs", c.max_dynamic_repairs},
        {"base_temperature", c.base_temperature},
        {"repair_temperature", c.repair_temperature},
        {"compiler_command", c.compiler.command},
        {"compile_timeout_ms", c.compiler.timeout.count()},
        {"wall_timeout_ms", c.limits.wall_timeout.count()},
        {"memory_cap", c.limits.memory_cap},
        {"output_cap", c.limits.output_cap},
        {"message_budget", c.prompt_options.message_budget},
    };
}

json guidance_json(const prompt::GuidanceEntry& e) {
    json causes = json::array();
    for (const auto& c : e.causes) {
        causes.push_back({{"explanation", c.explanation}, {"bad_snippet", c.bad_snippet}, {"fixed_snippet", c.fixed_snippet}});
    }
    return {{"error_code", e.error_code}, {"title", e.title}, {"causes", causes}};
}

}  // namespace

std::string PipelineConfig::digest(std::span<const prompt::GuidanceEntry> knowledge_base,
                                   std::string_view backend) const {
    json kb = json::array();
    for (const auto& e : knowledge_base) kb.push_back(guidance_json(e));
    json doc = {{"config", config_json(*this)}, {"knowledge_base", kb}, {"backend", backend}};
    return sha256_hex(doc.dump());
}

PipelineConfig parse_pipeline_config(std::string_view json_text) {
    PipelineConfig c;
    json j;
    try {
        j = json::parse(json_text);
        c.max_basic_repairs = j.value("max_basic_repairs", c.max_basic_repairs);
        c.max_guided_repairs = j.value("max_guided_repairs", c.max_guided_repairs);
        c.max_dynamic_repairs = j.value("max_dynamic_repairs", c.max_dynamic_repairs);
        c.base_temperature = j.value("base_temperature", c.base_temperature);
        c.repair_temperature = j.value("repair_temperature", c.repair_temperature);
        if (j.contains("compiler_command")) c.compiler.command = j["compiler_command"].get<std::vector<std::string>>();
        c.compiler.timeout = std::chrono::milliseconds(j.value("compile_timeout_ms", c.compiler.timeout.count()));
        c.limits.wall_timeout = std::chrono::milliseconds(j.value("wall_timeout_ms", c.limits.wall_timeout.count()));
        c.limits.memory_cap = j.value("memory_cap", c.limits.memory_cap);
        c.limits.output_cap = j.value("output_cap", c.limits.output_cap);
        c.prompt_options.message_budget = j.value("message_budget", c.prompt_options.message_budget);
    } catch (const json::exception& e) {
        throw llm::ConfigError(std::string("pipeline config: ") + e.what());
    }
    if (c.max_basic_repairs < 0 || c.max_guided_repairs < 0 || c.max_dynamic_repairs < 0) {
        throw llm::ConfigError("pipeline config: iteration caps must be >= 0");
    }
    if (c.base_temperature < 0 || c.base_temperature > 2 || c.repair_temperature < 0 || c.repair_temperature > 2) {
        throw llm::ConfigError("pipeline config: temperature must lie in [0, 2]");
    }
    if (c.compiler.command.empty()) throw llm::ConfigError("pipeline config: empty compiler command");
    c.limits.validate();
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw llm::ConfigError("cannot read pipeline config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pipeline_config(ss.str());
}

// ---------------------------------------------------------------- records

namespace {

json metrics_json(const corpus::CodeMetrics& m) {
    return {{"loc", m.loc},
            {"functions", m.functions},
            {"pointers", m.pointers},
            {"structs", m.structs},
            {"memory_calls", m.memory_calls}};
}

corpus::CodeMetrics metrics_from(const json& j) {
    corpus::CodeMetrics m;
    m.loc = j.at("loc").get<std::size_t>();
    m.functions = j.at("functions").get<std::size_t>();
    m.pointers = j.at("pointers").get<std::size_t>();
    m.structs = j.at("structs").get<std::size_t>();
    m.memory_calls = j.at("memory_calls").get<std::size_t>();
    return m;
}

json params_json(const llm::GenerationParams& p) {
    json j = {{"temperature", p.temperature}, {"max_tokens", p.max_tokens}};
    j["top_p"] = p.top_p ? json(*p.top_p) : json(nullptr);
    j["top_k"] = p.top_k ? json(*p.top_k) : json(nullptr);
    return j;
}

llm::GenerationParams params_from(const json& j) {
    llm::GenerationParams p;
    p.temperature = j.at("temperature").get<double>();
    p.max_tokens = j.at("max_tokens").get<int>();
    if (!j.at("top_p").is_null()) p.top_p = j["top_p"].get<double>();
    if (!j.at("top_k").is_null()) p.top_k = j["top_k"].get<int>();
    return p;
}

json diagnostic_json(const build::Diagnostic& d) {
    return {{"code", d.code ? json(*d.code) : json(nullptr)},
            {"level", d.level == build::Level::error ? "error" : "warning"},
            {"message", d.message},
            {"rendered", d.rendered}};
}

build::Diagnostic diagnostic_from(const json& j) {
    build::Diagnostic d;
    if (!j.at("code").is_null()) d.code = j["code"].get<std::string>();
    d.level = j.at("level").get<std::string>() == "error" ? build::Level::error : build::Level::warning;
    d.message = j.at("message").get<std::string>();
    d.rendered = j.at("rendered").get<std::string>();
    return d;
}

std::string line_of(const json& j) { return j.dump() + "\n"; }

}  // namespace

JsonlTranscriptWriter::JsonlTranscriptWriter(fs::path program_dir, std::string config_digest)
    : dir_(std::move(program_dir)), digest_(std::move(config_digest)) {
    fs::create_directories(dir_);
}

void JsonlTranscriptWriter::append(const fs::path& file, const std::string& line) {
    std::ofstream out(dir_ / file, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + (dir_ / file).string());
    out << line;
    out.flush();
}

void JsonlTranscriptWriter::begin(const std::string& program_id, const corpus::CodeMetrics& metrics) {
    append("transcript.jsonl", line_of({{"type", "program"},
                                        {"program_id", program_id},
                                        {"metrics", metrics_json(metrics)},
                                        {"config_digest", digest_}}));
}

void JsonlTranscriptWriter::attempt(std::size_t index, const Attempt& a) {
    json extraction;
    if (const auto* code = a.code()) extraction = {{"code", *code}};
    else extraction = {{"error", std::get<llm::GenerationError>(a.extraction).reason}};
    append("transcript.jsonl", line_of({{"type", "attempt"},
                                        {"index", index},
                                        {"phase", to_string(a.phase)},
                                        {"prompt_kind", prompt::to_string(a.prompt_kind)},
                                        {"params", params_json(a.params)},
                                        {"prompt", a.prompt},
                                        {"response", a.response},
                                        {"finish_reason", llm::to_string(a.finish_reason)},
                                        {"backend_error", a.backend_error},
                                        {"extraction", extraction}}));
}

void JsonlTranscriptWriter::compiled(std::size_t index, const build::CompileResult& r) {
    json diags = json::array();
    for (const auto& d : r.diagnostics) diags.push_back(diagnostic_json(d));
    json binary = nullptr;
    if (r.binary_path) binary = fs::relative(*r.binary_path, dir_).generic_string();
    append("transcript.jsonl", line_of({{"type", "compile"},
                                        {"index", index},
                                        {"status", r.ok() ? "success" : "failure"},
                                        {"binary", binary},
                                        {"diagnostics", diags}}));
    append("timing.jsonl", line_of({{"index", index}, {"compile_ms", r.duration.count()}}));
}

void JsonlTranscriptWriter::validated(std::size_t index, const exec::ValidationResult& r) {
    json cases = json::array();
    json durations = json::array();
    for (const auto& c : r.per_case) {
        cases.push_back({{"status", exec::to_string(c.status)},
                         {"exit_code", c.termination.exit_code},
                         {"signal", c.termination.signal},
                         {"timed_out", c.termination.timed_out},
                         {"output_overflow", c.termination.output_overflow}});
        durations.push_back(c.duration.count());
    }
    append("transcript.jsonl", line_of({{"type", "validation"},
                                        {"index", index},
                                        {"verdict", exec::to_string(r.verdict)},
                                        {"failing_case", r.failing_case ? json(*r.failing_case) : json(nullptr)},
                                        {"detail", r.detail},
                                        {"per_case", cases}}));
    append("timing.jsonl", line_of({{"index", index}, {"case_ms", durations}}));
}

void JsonlTranscriptWriter::finish(OutcomeKind outcome, const IterationCounts& n) {
    append("transcript.jsonl", line_of({{"type", "outcome"},
                                        {"outcome", to_string(outcome)},
                                        {"iterations",
                                         {{"base", n.base},
                                          {"basic_repair", n.basic_repair},
                                          {"guided_repair", n.guided_repair},
                                          {"dynamic_repair", n.dynamic_repair}}}}));
}

StoredTranscript read_transcript(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw TranscriptFormatError("cannot read " + file.string());
    StoredTranscript stored;
    Transcript& t = stored.transcript;
    const fs::path dir = file.parent_path();
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json j = json::parse(line);
            std::string type = j.at("type").get<std::string>();
            if (stored.complete) throw TranscriptFormatError("record after outcome");
            if (type == "program") {
                t.program_id = j.at("program_id").get<std::string>();
                t.metrics = metrics_from(j.at("metrics"));
                stored.config_digest = j.at("config_digest").get<std::string>();
                header = true;
                continue;
            }
            if (!header) throw TranscriptFormatError("missing program header");
            if (type == "attempt") {
                if (j.at("index").get<std::size_t>() != t.attempts.size() + 1) {
                    throw TranscriptFormatError("attempt index out of sequence");
                }
                Attempt a;
                a.phase = phase_from_string(j.at("phase").get<std::string>());
                a.prompt_kind = prompt::prompt_kind_from_string(j.at("prompt_kind").get<std::string>());
                a.params = params_from(j.at("params"));
                a.prompt = j.at("prompt").get<std::string>();
                a.response = j.at("response").get<std::string>();
                a.finish_reason = llm::finish_reason_from_string(j.at("finish_reason").get<std::string>());
                a.backend_error = j.at("backend_error").get<std::string>();
                const json& ex = j.at("extraction");
                if (ex.contains("code")) a.extraction = ex["code"].get<std::string>();
                else a.extraction = llm::GenerationError{ex.at("error").get<std::string>()};
                t.attempts.push_back(std::move(a));
            } else if (type == "compile") {
                std::size_t index = j.at("index").get<std::size_t>();
                if (index == 0 || index > t.attempts.size()) throw TranscriptFormatError("compile for unknown attempt");
                build::CompileResult r;
                r.status = j.at("status").get<std::string>() == "success" ? build::CompileStatus::success
                                                                          : build::CompileStatus::failure;
                if (!j.at("binary").is_null()) r.binary_path = dir / j["binary"].get<std::string>();
                for (const auto& d : j.at("diagnostics")) r.diagnostics.push_back(diagnostic_from(d));
                t.attempts[index - 1].compile = std::move(r);
            } else if (type == "validation") {
                std::size_t index = j.at("index").get<std::size_t>();
                if (index == 0 || index > t.attempts.size()) throw TranscriptFormatError("validation for unknown attempt");
                exec::ValidationResult r;
                r.verdict = exec::verdict_from_string(j.at("verdict").get<std::string>());
                if (!j.at("failing_case").is_null()) r.failing_case = j["failing_case"].get<std::size_t>();
                r.detail = j.at("detail").get<std::string>();
                for (const auto& c : j.at("per_case")) {
                    exec::CaseRun run;
                    run.status = exec::verdict_from_string(c.at("status").get<std::string>());
                    run.termination = {c.at("exit_code").get<int>(), c.at("signal").get<int>(),
                                       c.at("timed_out").get<bool>(), c.at("output_overflow").get<bool>()};
                    r.per_case.push_back(run);
                }
                t.attempts[index - 1].validation = std::move(r);
            } else if (type == "outcome") {
                t.outcome = outcome_from_string(j.at("outcome").get<std::string>());
                const json& n = j.at("iterations");
                t.iterations = {n.at("base").get<int>(), n.at("basic_repair").get<int>(),
                                n.at("guided_repair").get<int>(), n.at("dynamic_repair").get<int>()};
                stored.complete = true;
            } else {
                throw TranscriptFormatError("unknown record type " + type);
            }
        }
    } catch (const json::exception& e) {
        throw TranscriptFormatError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw TranscriptFormatError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!header) throw TranscriptFormatError(file.string() + ": empty transcript");
    return stored;
}

// ---------------------------------------------------------------- state machine

namespace {

class ProgramRun {
public:
    ProgramRun(const corpus::SourceProgram& program, llm::Gateway& gateway, const PipelineContext& ctx)
        : program_(program), gateway_(gateway), ctx_(ctx), cfg_(ctx.config) {
        transcript_.program_id = program.id;
        transcript_.metrics = program.metrics;
    }

    Transcript run() {
        if (ctx_.sink) ctx_.sink->begin(program_.id, program_.metrics);

        const std::string base = prompt::build_base_prompt(program_.source_text);
        Attempt& first = request(Phase::base, prompt::PromptKind::base, base);
        if (!first.code()) return finish(OutcomeKind::generation_error);
        compile_latest();

        bool compiled = last_compile().ok();
        while (!compiled && transcript_.iterations.basic_repair < cfg_.max_basic_repairs) {
            compiled = repair_compilation(Phase::basic_repair, false);
        }
        if (!compiled && transcript_.iterations.basic_repair == cfg_.max_basic_repairs &&
            select_guided_phase(last_compile().diagnostics)) {
            while (!compiled && transcript_.iterations.guided_repair < cfg_.max_guided_repairs) {
                compiled = repair_compilation(Phase::guided_repair, true);
            }
        }
        if (!compiled) return finish(OutcomeKind::compilation_error);

        validate_latest();
        auto passed = [this] { return last_validation() && last_validation()->verdict == exec::Verdict::pass; };
        while (!passed() && transcript_.iterations.dynamic_repair < cfg_.max_dynamic_repairs) {
            repair_dynamic();
        }
        return finish(classify_final(transcript_));
    }

private:
    Attempt& request(Phase phase, prompt::PromptKind kind, std::string prompt_text) {
        Attempt a;
        a.phase = phase;
        a.prompt_kind = kind;
        a.params.temperature = phase == Phase::base ? cfg_.base_temperature : cfg_.repair_temperature;
        a.params.top_p = gateway_.spec().top_p;
        a.params.top_k = gateway_.spec().top_k;
        a.params.max_tokens = gateway_.spec().max_tokens;
        a.prompt = std::move(prompt_text);

        llm::RawResponse raw = gateway_.complete({a.prompt, a.params, program_.id});
        a.response = raw.text;
        a.finish_reason = raw.finish_reason;
        a.backend_error = raw.error;
        a.extraction = llm::extract_code(raw);

        switch (phase) {
            case Phase::base: ++transcript_.iterations.base; break;
            case Phase::basic_repair: ++transcript_.iterations.basic_repair; break;
            case Phase::guided_repair: ++transcript_.iterations.guided_repair; break;
            case Phase::dynamic_repair: ++transcript_.iterations.dynamic_repair; break;
        }
        transcript_.attempts.push_back(std::move(a));
        if (ctx_.sink) ctx_.sink->attempt(transcript_.attempts.size(), transcript_.attempts.back());
        if (const auto* code = transcript_.attempts.back().code()) latest_code_ = *code;
        return transcript_.attempts.back();
    }

    void compile_latest() {
        const std::size_t index = transcript_.attempts.size();
        Attempt& a = transcript_.attempts.back();
        fs::path workdir = ctx_.program_dir / ("attempt-" + std::to_string(index));
        a.compile = build::compile(*a.code(), workdir, cfg_.compiler);
        compile_index_ = index - 1;
        validation_index_.reset();
        if (ctx_.sink) ctx_.sink->compiled(index, *a.compile);
    }

    void validate_latest() {
        const std::size_t index = transcript_.attempts.size();
        Attempt& a = transcript_.attempts.back();
        a.validation = exec::run_tests(*a.compile->binary_path, program_.test_cases, cfg_.limits);
        validation_index_ = index - 1;
        if (ctx_.sink) ctx_.sink->validated(index, *a.validation);
    }

    std::string basic_repair_prompt() const {
        auto errors = last_compile().errors();
        return prompt::build_repair_prompt(program_.source_text, latest_code_, build::render_errors(errors),
                                           cfg_.prompt_options);
    }

    // One compile-repair iteration; returns whether the new translation compiles.
    bool repair_compilation(Phase phase, bool guided) {
        auto errors = last_compile().errors();
        bool use_guidance = guided && !prompt::select_guidance(errors, ctx_.knowledge_base).empty();
        std::string text = use_guidance
                               ? prompt::build_guided_prompt(program_.source_text, latest_code_, errors,
                                                             ctx_.knowledge_base, cfg_.prompt_options)
                               : basic_repair_prompt();
        auto kind = use_guidance ? prompt::PromptKind::guided_repair : prompt::PromptKind::basic_repair;
        Attempt& a = request(phase, kind, std::move(text));
        if (!a.code()) return false;
        compile_latest();
        return last_compile().ok();
    }

    void repair_dynamic() {
        if (last_validation() == nullptr) {
            // The previous dynamic attempt failed to compile: fix that with a basic prompt.
            Attempt& a = request(Phase::dynamic_repair, prompt::PromptKind::basic_repair, basic_repair_prompt());
            if (!a.code()) return;
        } else {
            prompt::DynamicErrorType type = prompt::DynamicErrorType::runtime;
            if (last_validation()->verdict == exec::Verdict::infinite_loop) type = prompt::DynamicErrorType::infinite_loop;
            else if (last_validation()->verdict == exec::Verdict::test_case_error) type = prompt::DynamicErrorType::test_case;
            std::string text = prompt::build_dynamic_prompt(program_.source_text, latest_code_, type,
                                                            last_validation()->detail, cfg_.prompt_options);
            Attempt& a = request(Phase::dynamic_repair, prompt::PromptKind::dynamic_repair, std::move(text));
            if (!a.code()) return;
        }
        compile_latest();
        if (last_compile().ok()) validate_latest();
    }

    Transcript finish(OutcomeKind outcome) {
        transcript_.outcome = outcome;
        if (ctx_.sink) ctx_.sink->finish(outcome, transcript_.iterations);
        return std::move(transcript_);
    }

    const corpus::SourceProgram& program_;
    llm::Gateway& gateway_;
    const PipelineContext& ctx_;
    const PipelineConfig& cfg_;
    Transcript transcript_;
    std::string latest_code_;
    // Attempt indices rather than pointers: attempts_ reallocates as it grows.
    std::size_t compile_index_ = 0;
    std::optional<std::size_t> validation_index_;

    const build::CompileResult& last_compile() const { return *transcript_.attempts[compile_index_].compile; }
    const exec::ValidationResult* last_validation() const {
        return validation_index_ ? &*transcript_.attempts[*validation_index_].validation : nullptr;
    }
};

}  // namespace

Transcript translate_program(const corpus::SourceProgram& program, llm::Gateway& gateway, const PipelineContext& ctx) {
    return ProgramRun(program, gateway, ctx).run();
}

// ---------------------------------------------------------------- campaign

CampaignState read_state(const fs::path& state_file) {
    std::ifstream in(state_file);
    if (!in) throw CampaignError("cannot read " + state_file.string());
    try {
        json j = json::parse(in);
        CampaignState s;
        s.run_id = j.at("run_id").get<std::string>();
        s.backend = j.at("backend").get<std::string>();
        s.config_digest = j.at("config_digest").get<std::string>();
        for (const auto& id : j.at("completed")) s.completed.insert(id.get<std::string>());
        return s;
    } catch (const json::exception& e) {
        throw CampaignError("corrupted state file " + state_file.string() + ": " + e.what());
    }
}

void write_state(const fs::path& state_file, const CampaignState& s) {
    json j = {{"run_id", s.run_id},
              {"backend", s.backend},
              {"config_digest", s.config_digest},
              {"completed", json(std::vector<std::string>(s.completed.begin(), s.completed.end()))}};
    fs::path tmp = state_file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw CampaignError("cannot write " + tmp.string());
        out << j.dump(2) << "\n";
        out.flush();
        if (!out) throw CampaignError("cannot write " + tmp.string());
    }
    fs::rename(tmp, state_file);
}

void reset_run(const fs::path& run_dir) {
    std::error_code ec;
    if (!fs::exists(run_dir, ec)) return;
    fs::remove(run_dir / "state.json", ec);
    fs::remove(run_dir / "state.json.tmp", ec);
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "transcript.jsonl")) fs::remove_all(entry.path());
    }
}

std::vector<Transcript> load_run(const fs::path& run_dir) {
    std::vector<Transcript> out;
    std::error_code ec;
    if (!fs::is_directory(run_dir, ec)) throw CampaignError("run directory missing: " + run_dir.string());
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        fs::path file = entry.path() / "transcript.jsonl";
        if (!entry.is_directory() || !fs::exists(file)) continue;
        StoredTranscript stored = read_transcript(file);
        if (stored.complete) out.push_back(std::move(stored.transcript));
    }
    std::sort(out.begin(), out.end(), [](const Transcript& a, const Transcript& b) { return a.program_id < b.program_id; });
    return out;
}

CampaignResult run_campaign(const corpus::Corpus& corpus, llm::Gateway& gateway, const PipelineConfig& config,
                            std::span<const prompt::GuidanceEntry> knowledge_base, const CampaignOptions& options) {
    const fs::path& run_dir = options.run_dir;
    const fs::path state_file = run_dir / "state.json";
    const std::string digest = config.digest(knowledge_base, gateway.spec().name);
    fs::create_directories(run_dir);

    CampaignState state;
    state.run_id = fs::absolute(run_dir).lexically_normal().filename().string();
    state.backend = gateway.spec().name;
    state.config_digest = digest;

    std::error_code ec;
    bool has_records = false;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "transcript.jsonl")) has_records = true;
    }

    if (fs::exists(state_file, ec)) {
        if (!options.resume) {
            throw CampaignError("run directory " + run_dir.string() + " already holds a campaign; resume or reset it");
        }
        CampaignState previous = read_state(state_file);
        if (previous.config_digest != digest) {
            throw CampaignError("configuration changed since the run started (digest " + previous.config_digest +
                                " vs " + digest + "); refusing to resume");
        }
        for (const auto& id : previous.completed) {
            fs::path file = run_dir / id / "transcript.jsonl";
            if (!fs::exists(file) || !read_transcript(file).complete) {
                throw CampaignError("state lists " + id + " as completed but its transcript is incomplete");
            }
        }
        state.completed = std::move(previous.completed);
    } else if (has_records) {
        if (!options.resume) {
            throw CampaignError("run directory " + run_dir.string() + " holds transcripts; resume or reset it");
        }
        // Rebuild the summary from the per-program records.
        for (const auto& entry : fs::directory_iterator(run_dir)) {
            fs::path file = entry.path() / "transcript.jsonl";
            if (!entry.is_directory() || !fs::exists(file)) continue;
            StoredTranscript stored;
            try {
                stored = read_transcript(file);
            } catch (const TranscriptFormatError&) {
                continue;  // torn write from an interrupted run; redone below
            }
            if (!stored.complete) continue;
            if (stored.config_digest != digest) {
                throw CampaignError("transcript " + file.string() + " was produced under a different configuration");
            }
            state.completed.insert(stored.transcript.program_id);
        }
    }
    write_state(state_file, state);

    std::vector<const corpus::SourceProgram*> pending;
    for (const auto& p : corpus.programs) {
        if (!state.completed.contains(p.id)) pending.push_back(&p);
    }

    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::stop_source abort;
    std::size_t executed = 0;

    auto worker = [&] {
        while (!options.stop.stop_requested() && !abort.stop_requested()) {
            std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) return;
            const corpus::SourceProgram& program = *pending[i];
            try {
                fs::path program_dir = run_dir / program.id;
                fs::remove_all(program_dir);
                JsonlTranscriptWriter writer(program_dir, digest);
                PipelineContext ctx{config, knowledge_base, program_dir, &writer};
                Transcript t = translate_program(program, gateway, ctx);
                std::lock_guard lock(mutex);
                state.completed.insert(program.id);
                write_state(state_file, state);
                ++executed;
                if (options.on_complete) options.on_complete(t);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
                abort.request_stop();
                return;
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        std::size_t n = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(pending.size(), 1)));
        for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    CampaignResult result;
    result.executed = executed;
    result.finished = std::all_of(corpus.programs.begin(), corpus.programs.end(),
                                  [&](const corpus::SourceProgram& p) { return state.completed.contains(p.id); });
    for (const auto& id : state.completed) {
        StoredTranscript stored = read_transcript(run_dir / id / "transcript.jsonl");
        result.transcripts.push_back(std::move(stored.transcript));
    }
    result.state = std::move(state);
    return result;
}

}  // namespace rustport::pipeline
