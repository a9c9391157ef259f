#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rustport::llm {

struct GenerationParams {
    double temperature = 0.2;
    std::optional<double> top_p;
    std::optional<int> top_k;
    int max_tokens = 4096;

    bool operator==(const GenerationParams&) const = default;
};

enum class FinishReason { complete, length_truncated, backend_error };

std::string_view to_string(FinishReason reason);
FinishReason finish_reason_from_string(std::string_view text);

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct RawResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::backend_error;
    TokenUsage usage;
    std::string error;  // transport detail when finish_reason == backend_error
    int attempts = 0;
};

struct BackendSpec {
    std::string name;
    std::string kind = "openai";  // "openai" (chat-completions over HTTP) or "scripted"
    std::string endpoint;
    std::string model;
    std::string auth_env;         // environment variable holding the API key
    double rate_limit = 60.0;     // requests per minute
    int retries = 3;
    int max_context_tokens = 128'000;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::milliseconds request_timeout{300'000};
    std::optional<double> top_p;
    std::optional<int> top_k;
    int max_tokens = 4096;
    std::filesystem::path scripted_dir;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a backend config file: `{"backends": [{...}, ...]}`.
std::vector<BackendSpec> load_backend_config(const std::filesystem::path& path);
std::vector<BackendSpec> parse_backend_config(std::string_view json_text,
                                              const std::filesystem::path& base_dir = {});
const BackendSpec& find_backend(const std::vector<BackendSpec>& specs, std::string_view name);

struct Request {
    std::string prompt;
    GenerationParams params;
    std::string program_id;  // lets scripted backends serve per-program playlists
};

enum class AttemptStatus { ok, transient_failure, permanent_failure };

struct AttemptResult {
    AttemptStatus status = AttemptStatus::permanent_failure;
    RawResponse response;  // filled when status == ok
    std::string error;
};

/// One transport. A Backend performs exactly one attempt per call; retries,
/// backoff, rate limiting and the context precheck live in Gateway.
class Backend {
public:
    virtual ~Backend() = default;
    virtual const BackendSpec& spec() const = 0;
    virtual AttemptResult attempt(const Request& request) = 0;
};

/// Serves responses from a directory. `<dir>/<sha256(prompt)>.txt` wins; otherwise
/// `<dir>/<program-id>/` is read as an ordered playlist whose last entry repeats.
/// Playlist entry suffixes: `.txt` complete, `.truncated` length_truncated,
/// `.fail` transient transport failure.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(BackendSpec spec);
    const BackendSpec& spec() const override { return spec_; }
    AttemptResult attempt(const Request& request) override;

private:
    BackendSpec spec_;
    std::mutex mutex_;
    std::map<std::string, std::size_t> cursor_;
};

/// OpenAI-compatible chat-completions client.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(BackendSpec spec);
    const BackendSpec& spec() const override { return spec_; }
    AttemptResult attempt(const Request& request) override;

private:
    BackendSpec spec_;
};

std::unique_ptr<Backend> make_backend(const BackendSpec& spec);

/// Spaces request admissions at 60/rate_limit seconds.
class RateLimiter {
public:
    explicit RateLimiter(double per_minute);
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::steady_clock::duration interval_;
    std::chrono::steady_clock::time_point next_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class Gateway {
public:
    explicit Gateway(std::unique_ptr<Backend> backend, Sleeper sleeper = {});

    /// At most retries+1 attempts; transient failures back off exponentially.
    /// Never throws for transport problems: they surface as backend_error.
    RawResponse complete(const Request& request);

    const BackendSpec& spec() const { return backend_->spec(); }

private:
    std::unique_ptr<Backend> backend_;
    RateLimiter limiter_;
    Sleeper sleeper_;
};

/// Rough token estimate used for the local context-window precheck.
int estimate_tokens(std::string_view text);

struct GenerationError {
    std::string reason;
};

using Extraction = std::variant<std::string, GenerationError>;

/// Returns the body of the first ```rust fence, or of the first untagged fence
/// when no fence is tagged with the language. Unterminated chosen fences,
/// missing fences and non-complete finish reasons are generation errors.
Extraction extract_code(const RawResponse& raw, std::string_view language = "rust");

std::string wrap_in_fence(std::string_view code, std::string_view language = "rust");

}  // namespace rustport::llm
