#include "rustport/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rustport/digest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rustport::llm {

std::string_view to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::complete: return "complete";
        case FinishReason::length_truncated: return "length_truncated";
        case FinishReason::backend_error: return "backend_error";
    }
    return "backend_error";
}

FinishReason finish_reason_from_string(std::string_view text) {
    if (text == "complete") return FinishReason::complete;
    if (text == "length_truncated") return FinishReason::length_truncated;
    if (text == "backend_error") return FinishReason::backend_error;
    throw std::invalid_argument("unknown finish reason: " + std::string(text));
}

// ---------------------------------------------------------------- config

std::vector<BackendSpec> parse_backend_config(std::string_view json_text, const fs::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("backend config: ") + e.what());
    }
    if (!doc.contains("backends") || !doc["backends"].is_array()) {
        throw ConfigError("backend config: expected a \"backends\" array");
    }
    std::vector<BackendSpec> specs;
    for (const auto& b : doc["backends"]) {
        BackendSpec spec;
        try {
            spec.name = b.at("name").get<std::string>();
            spec.kind = b.value("kind", std::string("openai"));
            spec.endpoint = b.value("endpoint", std::string());
            spec.model = b.value("model", std::string());
            spec.auth_env = b.value("auth_env", std::string());
            spec.rate_limit = b.value("rate_limit", spec.rate_limit);
            spec.retries = b.value("retries", spec.retries);
            spec.max_context_tokens = b.value("max_context_tokens", spec.max_context_tokens);
            spec.initial_backoff = std::chrono::milliseconds(b.value("initial_backoff_ms", 1000));
            spec.request_timeout = std::chrono::milliseconds(b.value("request_timeout_ms", 300'000));
            spec.max_tokens = b.value("max_tokens", spec.max_tokens);
            if (b.contains("top_p") && !b["top_p"].is_null()) spec.top_p = b["top_p"].get<double>();
            if (b.contains("top_k") && !b["top_k"].is_null()) spec.top_k = b["top_k"].get<int>();
            if (b.contains("scripted_dir")) {
                fs::path dir = b["scripted_dir"].get<std::string>();
                spec.scripted_dir = dir.is_relative() && !base_dir.empty() ? base_dir / dir : dir;
            }
        } catch (const json::exception& e) {
            throw ConfigError(std::string("backend config entry: ") + e.what());
        }
        if (spec.rate_limit <= 0) throw ConfigError("backend " + spec.name + ": rate_limit must be > 0");
        if (spec.retries < 0) throw ConfigError("backend " + spec.name + ": retries must be >= 0");
        if (spec.kind != "openai" && spec.kind != "scripted") {
            throw ConfigError("backend " + spec.name + ": unknown kind " + spec.kind);
        }
        if (spec.kind == "scripted" && spec.scripted_dir.empty()) {
            throw ConfigError("backend " + spec.name + ": scripted backend needs scripted_dir");
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<BackendSpec> load_backend_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read backend config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_backend_config(ss.str(), path.parent_path());
}

const BackendSpec& find_backend(const std::vector<BackendSpec>& specs, std::string_view name) {
    for (const auto& s : specs) {
        if (s.name == name) return s;
    }
    throw ConfigError("no backend named " + std::string(name));
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
    if (spec.kind == "scripted") return std::make_unique<ScriptedBackend>(spec);
    return std::make_unique<HttpBackend>(spec);
}

// ---------------------------------------------------------------- scripted

namespace {

std::optional<std::string> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AttemptResult scripted_entry(const fs::path& file) {
    auto text = slurp(file);
    AttemptResult r;
    if (!text) {
        r.status = AttemptStatus::permanent_failure;
        r.error = "unreadable scripted response " + file.string();
        return r;
    }
    auto ext = file.extension().string();
    if (ext == ".fail") {
        r.status = AttemptStatus::transient_failure;
        r.error = *text;
        return r;
    }
    r.status = AttemptStatus::ok;
    r.response.text = std::move(*text);
    r.response.finish_reason = ext == ".truncated" ? FinishReason::length_truncated : FinishReason::complete;
    return r;
}

}  // namespace

ScriptedBackend::ScriptedBackend(BackendSpec spec) : spec_(std::move(spec)) {}

AttemptResult ScriptedBackend::attempt(const Request& request) {
    fs::path keyed = spec_.scripted_dir / (sha256_hex(request.prompt) + ".txt");
    std::error_code ec;
    if (fs::is_regular_file(keyed, ec)) return scripted_entry(keyed);

    fs::path playlist = spec_.scripted_dir / request.program_id;
    std::vector<fs::path> entries;
    if (!request.program_id.empty() && fs::is_directory(playlist, ec)) {
        for (const auto& e : fs::directory_iterator(playlist, ec)) {
            auto ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".txt" || ext == ".truncated" || ext == ".fail")) {
                entries.push_back(e.path());
            }
        }
    }
    if (entries.empty()) {
        AttemptResult r;
        r.status = AttemptStatus::permanent_failure;
        r.error = "no scripted response for prompt digest or program " + request.program_id;
        return r;
    }
    std::sort(entries.begin(), entries.end());
    std::size_t index;
    {
        std::lock_guard lock(mutex_);
        index = cursor_[request.program_id]++;
    }
    return scripted_entry(entries[std::min(index, entries.size() - 1)]);
}

// ---------------------------------------------------------------- gateway

RateLimiter::RateLimiter(double per_minute)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(60.0 / per_minute))),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

int estimate_tokens(std::string_view text) { return static_cast<int>((text.size() + 3) / 4); }

Gateway::Gateway(std::unique_ptr<Backend> backend, Sleeper sleeper)
    : backend_(std::move(backend)), limiter_(backend_->spec().rate_limit), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RawResponse Gateway::complete(const Request& request) {
    const BackendSpec& spec = backend_->spec();
    RawResponse failure;
    failure.finish_reason = FinishReason::backend_error;

    if (estimate_tokens(request.prompt) > spec.max_context_tokens) {
        failure.error = "prompt exceeds the configured context window (" +
                        std::to_string(estimate_tokens(request.prompt)) + " > " +
                        std::to_string(spec.max_context_tokens) + " tokens)";
        return failure;
    }

    auto backoff = spec.initial_backoff;
    for (int attempt = 1; attempt <= spec.retries + 1; ++attempt) {
        limiter_.acquire();
        AttemptResult r = backend_->attempt(request);
        if (r.status == AttemptStatus::ok) {
            r.response.attempts = attempt;
            return r.response;
        }
        failure.error = r.error;
        failure.attempts = attempt;
        if (r.status == AttemptStatus::permanent_failure) break;
        if (attempt <= spec.retries) {
            sleeper_(backoff);
            backoff *= 2;
        }
    }
    return failure;
}

// ---------------------------------------------------------------- extraction

namespace {

struct FenceBlock {
    std::string tag;
    std::string body;
    bool terminated = false;
};

std::string_view ltrim(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

std::string_view trim(std::string_view s) {
    s = ltrim(s);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<FenceBlock> scan_fences(std::string_view text) {
    std::vector<FenceBlock> blocks;
    std::size_t pos = 0;
    bool inside = false;
    std::size_t body_start = 0;
    FenceBlock current;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        bool last = eol == std::string_view::npos;
        std::string_view line = text.substr(pos, last ? std::string_view::npos : eol - pos);
        std::string_view lead = ltrim(line);
        if (lead.starts_with("```")) {
            std::string_view info = trim(lead.substr(3));
            if (!inside) {
                current = FenceBlock{};
                std::size_t sp = info.find_first_of(" \t{");
                std::string tag(info.substr(0, sp));
                std::transform(tag.begin(), tag.end(), tag.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                current.tag = tag;
                inside = true;
                body_start = last ? text.size() + 1 : eol + 1;
                if (last) break;
            } else if (info.empty()) {
                std::string_view body;
                if (pos > body_start) {
                    body = text.substr(body_start, pos - body_start);
                    if (body.ends_with('\n')) body.remove_suffix(1);
                }
                current.body = std::string(body);
                current.terminated = true;
                blocks.push_back(std::move(current));
                inside = false;
            }
        }
        if (last) break;
        pos = eol + 1;
    }
    if (inside) {
        if (body_start <= text.size()) current.body = std::string(text.substr(body_start));
        current.terminated = false;
        blocks.push_back(std::move(current));
    }
    return blocks;
}

}  // namespace

Extraction extract_code(const RawResponse& raw, std::string_view language) {
    if (raw.finish_reason == FinishReason::length_truncated) {
        return GenerationError{"response truncated at the length limit"};
    }
    if (raw.finish_reason == FinishReason::backend_error) {
        return GenerationError{"backend error: " + raw.error};
    }
    auto blocks = scan_fences(raw.text);
    const FenceBlock* chosen = nullptr;
    const FenceBlock* untagged = nullptr;
    for (const auto& b : blocks) {
        bool matches = b.tag == language || (language == "rust" && b.tag == "rs");
        if (matches) {
            chosen = &b;
            break;
        }
        if (b.tag.empty() && !untagged) untagged = &b;
    }
    if (!chosen) chosen = untagged;
    if (!chosen) return GenerationError{"no code fence in response"};
    if (!chosen->terminated) return GenerationError{"unterminated code fence"};
    return chosen->body;
}

std::string wrap_in_fence(std::string_view code, std::string_view language) {
    std::string out = "```";
    out.append(language);
    out.push_back('\n');
    out.append(code);
    out.append("\n```");
    return out;
}

}  // namespace rustport::llm
