#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "rustport/buildcheck.hpp"
#include "rustport/corpus.hpp"
#include "rustport/exec_validate.hpp"
#include "rustport/llm_gateway.hpp"
#include "rustport/metrics_report.hpp"
#include "rustport/promptkit.hpp"

using namespace rustport;

namespace {

std::string c_program(int functions) {
    std::string s = "#include <stdio.h>\n#include <stdlib.h>\n\n";
    for (int i = 0; i < functions; ++i) {
        s += "static int f" + std::to_string(i) + "(int *p, int n) {\n    /* step " + std::to_string(i) +
             " */\n    int acc = 0;\n    for (int k = 0; k < n; ++k) acc += p[k] * " + std::to_string(i + 1) +
             ";\n    return acc;\n}\n\n";
    }
    s += "int main(void) {\n    int v[4] = {1, 2, 3, 4};\n    int total = 0;\n";
    for (int i = 0; i < functions; i += 2) s += "    total += f" + std::to_string(i) + "(v, 4);\n";
    s += "    printf(\"%d\\n\", total);\n    return 0;\n}\n";
    return s;
}

std::string rustc_text(int errors) {
    static const char* codes[] = {"E0308", "E0384", "E0425", "E0599", "E0277", "E0502"};
    std::string s;
    for (int i = 0; i < errors; ++i) {
        s += std::string("error[") + codes[i % 6] + "]: something went wrong\n --> main.rs:" + std::to_string(i + 1) +
             ":5\n  |\n" + std::to_string(i + 1) + " |     let x = y;\n  |         ^ here\n\n";
    }
    s += "warning: unused variable: `z`\n --> main.rs:1:9\n\nerror: aborting due to previous errors\n";
    return s;
}

std::string rustc_json(int errors) {
    std::string s;
    for (int i = 0; i < errors; ++i) {
        s += R"({"$message_type":"diagnostic","message":"mismatched types","code":{"code":"E0308","explanation":null},)"
             R"("level":"error","spans":[],"children":[],"rendered":"error[E0308]: mismatched types\n"})"
             "\n";
    }
    return s;
}

void BM_ExtractCodeMetrics(benchmark::State& state) {
    const auto src = c_program(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(corpus::extract_code_metrics(src));
    state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(src.size()));
}
BENCHMARK(BM_ExtractCodeMetrics)->Range(4, 256);

void BM_StripDeadFunctions(benchmark::State& state) {
    const auto src = c_program(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(corpus::strip_dead_functions(src));
    state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(src.size()));
}
BENCHMARK(BM_StripDeadFunctions)->Range(4, 256);

void BM_ParseDiagnosticsText(benchmark::State& state) {
    const auto text = rustc_text(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build::parse_diagnostics(text));
}
BENCHMARK(BM_ParseDiagnosticsText)->Range(1, 512);

void BM_ParseDiagnosticsJson(benchmark::State& state) {
    const auto text = rustc_json(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build::parse_json_diagnostics(text));
}
BENCHMARK(BM_ParseDiagnosticsJson)->Range(1, 512);

void BM_NormalizeOutput(benchmark::State& state) {
    std::string out;
    for (int i = 0; i < state.range(0); ++i) out += std::to_string(i) + " " + std::to_string(i * 7) + "  \r\n";
    for (auto _ : state) benchmark::DoNotOptimize(exec::normalize_output(out));
    state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(out.size()));
}
BENCHMARK(BM_NormalizeOutput)->Range(16, 1 << 16);

void BM_ExtractCode(benchmark::State& state) {
    llm::RawResponse raw;
    raw.finish_reason = llm::FinishReason::complete;
    raw.text = "Here is the translation:\n\n" +
               llm::wrap_in_fence(std::string(static_cast<std::size_t>(state.range(0)), 'x') + "\nfn main() {}\n") +
               "\nThis keeps the original semantics.\n";
    for (auto _ : state) benchmark::DoNotOptimize(llm::extract_code(raw));
}
BENCHMARK(BM_ExtractCode)->Range(64, 1 << 16);

void BM_GuidedPrompt(benchmark::State& state) {
    const auto kb = prompt::load_knowledge_base(prompt::default_guidance_dir());
    const auto src = c_program(32);
    std::vector<build::Diagnostic> diags;
    for (auto code : prompt::guided_target_codes()) {
        diags.push_back({std::string(code), build::Level::error, "m", "error[" + std::string(code) + "]: m\n"});
    }
    for (auto _ : state) benchmark::DoNotOptimize(prompt::build_guided_prompt(src, "fn main() {}\n", diags, kb));
}
BENCHMARK(BM_GuidedPrompt);

void BM_CdfByMetric(benchmark::State& state) {
    std::mt19937 rng(7);
    std::vector<report::Transcript> ts;
    for (int i = 0; i < state.range(0); ++i) {
        report::Transcript t;
        t.program_id = "p" + std::to_string(i);
        t.outcome = pipeline::kAllOutcomes[rng() % pipeline::kAllOutcomes.size()];
        t.metrics.loc = rng() % 1000;
        ts.push_back(std::move(t));
    }
    const auto metrics = report::metrics_from_transcripts(ts);
    for (auto _ : state) benchmark::DoNotOptimize(report::cdf_by_metric(ts, metrics, report::Metric::loc));
}
BENCHMARK(BM_CdfByMetric)->Range(64, 1 << 14);

}  // namespace

BENCHMARK_MAIN();
