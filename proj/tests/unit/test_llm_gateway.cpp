#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <random>
#include <thread>

#include "rustport/digest.hpp"
#include "rustport/llm_gateway.hpp"
#include "support.hpp"

using namespace rustport;
using namespace rustport::llm;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

BackendSpec scripted_spec(const std::filesystem::path& dir) {
    BackendSpec s;
    s.name = "scripted";
    s.kind = "scripted";
    s.scripted_dir = dir;
    s.rate_limit = 1e6;
    s.initial_backoff = std::chrono::milliseconds(5);
    return s;
}

class CountingBackend final : public Backend {
public:
    CountingBackend(BackendSpec spec, int failures, AttemptStatus failure_kind = AttemptStatus::transient_failure)
        : spec_(std::move(spec)), failures_(failures), kind_(failure_kind) {}
    const BackendSpec& spec() const override { return spec_; }
    AttemptResult attempt(const Request&) override {
        ++calls;
        AttemptResult r;
        if (calls <= failures_) {
            r.status = kind_;
            r.error = "refused";
            return r;
        }
        r.status = AttemptStatus::ok;
        r.response.text = "```rust\nfn main() {}\n```";
        r.response.finish_reason = FinishReason::complete;
        return r;
    }
    int calls = 0;

private:
    BackendSpec spec_;
    int failures_;
    AttemptStatus kind_;
};

RawResponse complete_text(std::string text, FinishReason reason = FinishReason::complete) {
    RawResponse r;
    r.text = std::move(text);
    r.finish_reason = reason;
    return r;
}

}  // namespace

TEST_CASE("sha256 of a known string") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("scripted backend keyed to prompt hash") {
    TempDir dir;
    write_file(dir / (sha256_hex("translate me") + ".txt"), "```rust\nfn main() {}\n```\n");
    Gateway g(make_backend(scripted_spec(dir.path())));
    auto r = g.complete({"translate me", {}, "whatever"});
    CHECK(r.finish_reason == FinishReason::complete);
    CHECK(r.text == "```rust\nfn main() {}\n```\n");
    CHECK(r.attempts == 1);
}

TEST_CASE("scripted playlist advances and repeats its last entry") {
    TempDir dir;
    write_file(dir / "p/01.txt", "one");
    write_file(dir / "p/02.truncated", "two");
    write_file(dir / "p/03.txt", "three");
    Gateway g(make_backend(scripted_spec(dir.path())), [](auto) {});
    CHECK(g.complete({"x", {}, "p"}).text == "one");
    auto second = g.complete({"x", {}, "p"});
    CHECK(second.text == "two");
    CHECK(second.finish_reason == FinishReason::length_truncated);
    CHECK(g.complete({"x", {}, "p"}).text == "three");
    CHECK(g.complete({"x", {}, "p"}).text == "three");
}

TEST_CASE("missing scripted response is a backend error") {
    TempDir dir;
    Gateway g(make_backend(scripted_spec(dir.path())), [](auto) {});
    auto r = g.complete({"x", {}, "nobody"});
    CHECK(r.finish_reason == FinishReason::backend_error);
    CHECK(r.attempts == 1);
}

TEST_CASE("two refusals then success with retries=3") {
    auto spec = scripted_spec({});
    spec.retries = 3;
    auto backend = std::make_unique<CountingBackend>(spec, 2);
    auto* raw = backend.get();
    std::vector<std::chrono::milliseconds> sleeps;
    Gateway g(std::move(backend), [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
    auto r = g.complete({"p", {}, ""});
    CHECK(r.finish_reason == FinishReason::complete);
    CHECK(r.attempts == 3);
    CHECK(raw->calls == 3);
    REQUIRE(sleeps.size() == 2);
    CHECK(sleeps[1] == 2 * sleeps[0]);
}

TEST_CASE("retries exhausted yields backend_error") {
    auto spec = scripted_spec({});
    spec.retries = 1;
    auto backend = std::make_unique<CountingBackend>(spec, 5);
    auto* raw = backend.get();
    Gateway g(std::move(backend), [](auto) {});
    auto r = g.complete({"p", {}, ""});
    CHECK(r.finish_reason == FinishReason::backend_error);
    CHECK(raw->calls == 2);
}

TEST_CASE("permanent failure is not retried") {
    auto spec = scripted_spec({});
    spec.retries = 4;
    auto backend = std::make_unique<CountingBackend>(spec, 5, AttemptStatus::permanent_failure);
    auto* raw = backend.get();
    Gateway g(std::move(backend), [](auto) {});
    CHECK(g.complete({"p", {}, ""}).finish_reason == FinishReason::backend_error);
    CHECK(raw->calls == 1);
}

TEST_CASE("oversized prompt is rejected without calling the backend") {
    auto spec = scripted_spec({});
    spec.max_context_tokens = 10;
    auto backend = std::make_unique<CountingBackend>(spec, 0);
    auto* raw = backend.get();
    Gateway g(std::move(backend), [](auto) {});
    auto r = g.complete({std::string(400, 'x'), {}, ""});
    CHECK(r.finish_reason == FinishReason::backend_error);
    CHECK(raw->calls == 0);
}

TEST_CASE("backend config parsing") {
    auto specs = parse_backend_config(R"({"backends": [
        {"name": "a", "endpoint": "http://localhost:1/v1/chat/completions", "model": "m", "auth_env": "KEY",
         "rate_limit": 30, "retries": 2, "top_p": 0.9},
        {"name": "s", "kind": "scripted", "scripted_dir": "resp"}]})",
                                      "/base");
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].retries == 2);
    CHECK(*specs[0].top_p == doctest::Approx(0.9));
    CHECK(specs[1].scripted_dir == std::filesystem::path("/base/resp"));
    CHECK(&find_backend(specs, "s") == &specs[1]);
    CHECK_THROWS_AS(find_backend(specs, "zz"), ConfigError);
    CHECK_THROWS_AS(parse_backend_config(R"({"backends": [{"name": "x", "kind": "telepathy"}]})"), ConfigError);
    CHECK_THROWS_AS(parse_backend_config("not json"), ConfigError);
}

TEST_CASE("extract exact fence") {
    auto e = extract_code(complete_text("```rust\nfn main(){}\n```"));
    REQUIRE(std::holds_alternative<std::string>(e));
    CHECK(std::get<std::string>(e) == "fn main(){}");
}

TEST_CASE("prose without fence is a generation error") {
    auto e = extract_code(complete_text("I would translate this by using vectors."));
    CHECK(std::holds_alternative<GenerationError>(e));
}

TEST_CASE("first of two fenced blocks wins") {
    auto e = extract_code(complete_text("```rust\nfn a() {}\n```\ntext\n```rust\nfn b() {}\n```\n"));
    CHECK(std::get<std::string>(e) == "fn a() {}");
}

TEST_CASE("tagged fence preferred over an earlier untagged one") {
    auto e = extract_code(complete_text("```\ncargo run\n```\n```rust\nfn main() {}\n```\n"));
    CHECK(std::get<std::string>(e) == "fn main() {}");
}

TEST_CASE("untagged fence used when no tagged fence exists") {
    auto e = extract_code(complete_text("```\nfn main() {}\n```\n"));
    CHECK(std::get<std::string>(e) == "fn main() {}");
}

TEST_CASE("unterminated fence and truncated finish are generation errors") {
    CHECK(std::holds_alternative<GenerationError>(extract_code(complete_text("```rust\nfn main() {"))));
    CHECK(std::holds_alternative<GenerationError>(
        extract_code(complete_text("```rust\nfn main() {}\n```", FinishReason::length_truncated))));
    CHECK(std::holds_alternative<GenerationError>(
        extract_code(complete_text("```rust\nfn main() {}\n```", FinishReason::backend_error))));
}

TEST_CASE("property: wrap then extract is the identity") {
    std::mt19937 rng(3);
    const std::string alphabet = "abcdefghij {}();:=<>\"'\\\n\t0123456789_-+*/`";
    for (int i = 0; i < 500; ++i) {
        std::string code;
        const int len = static_cast<int>(rng() % 200);
        for (int k = 0; k < len; ++k) code += alphabet[rng() % alphabet.size()];
        // A line starting with a fence marker would close the block; keep generated code fence-free.
        std::string cleaned;
        for (std::size_t k = 0; k < code.size(); ++k) {
            if (code.compare(k, 3, "```") == 0) {
                cleaned += "``";
                k += 2;
                continue;
            }
            cleaned += code[k];
        }
        auto e = extract_code(complete_text("Sure.\n" + wrap_in_fence(cleaned) + "\nDone."));
        REQUIRE(std::holds_alternative<std::string>(e));
        CHECK(std::get<std::string>(e) == cleaned);
    }
}

TEST_CASE("HTTP backend: two server errors then a completion") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth, seen_model;
    double seen_temperature = -1;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (++hits <= 2) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        seen_auth = req.get_header_value("Authorization");
        seen_model = body["model"];
        seen_temperature = body["temperature"];
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "```rust\nfn main() {}\n```"}}},
                          {"finish_reason", "stop"}}}},
            {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 7}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("RUSTPORT_TEST_KEY", "sekret", 1);
    BackendSpec spec;
    spec.name = "local";
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    spec.model = "tiny";
    spec.auth_env = "RUSTPORT_TEST_KEY";
    spec.retries = 3;
    spec.rate_limit = 1e6;
    spec.request_timeout = std::chrono::milliseconds(5000);
    Gateway g(make_backend(spec), [](auto) {});
    GenerationParams params;
    params.temperature = 0.6;
    auto r = g.complete({"hello", params, "p"});

    server.stop();
    t.join();

    CHECK(hits == 3);
    CHECK(r.finish_reason == FinishReason::complete);
    CHECK(r.attempts == 3);
    CHECK(r.usage.completion_tokens == 7);
    CHECK(seen_auth == "Bearer sekret");
    CHECK(seen_model == "tiny");
    CHECK(seen_temperature == doctest::Approx(0.6));
    CHECK(std::get<std::string>(extract_code(r)) == "fn main() {}");
}

TEST_CASE("HTTP backend maps length finish to truncation and missing key to failure") {
    httplib::Server server;
    server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
        nlohmann::json reply = {
            {"choices", {{{"message", {{"content", "```rust\nfn main() {"}}}, {"finish_reason", "length"}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendSpec spec;
    spec.name = "local";
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/c";
    spec.rate_limit = 1e6;
    Gateway g(make_backend(spec), [](auto) {});
    auto r = g.complete({"hello", {}, "p"});
    CHECK(r.finish_reason == FinishReason::length_truncated);

    spec.auth_env = "RUSTPORT_TEST_UNSET_KEY";
    ::unsetenv("RUSTPORT_TEST_UNSET_KEY");
    Gateway g2(make_backend(spec), [](auto) {});
    auto r2 = g2.complete({"hello", {}, "p"});
    CHECK(r2.finish_reason == FinishReason::backend_error);
    CHECK(r2.attempts == 1);

    server.stop();
    t.join();
}
