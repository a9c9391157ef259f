#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stop_token>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "rustport/corpus.hpp"
#include "rustport/llm_gateway.hpp"
#include "rustport/metrics_report.hpp"
#include "rustport/orchestrator.hpp"
#include "rustport/promptkit.hpp"
#include "rustport/vuln_mitigation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace rustport;

namespace {

std::stop_source g_stop;

extern "C" void on_interrupt(int) { g_stop.request_stop(); }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + p.string());
}

struct RunArgs {
    fs::path corpus;
    std::string backend;
    fs::path backends = "backends.json";
    fs::path out;
    fs::path config;
    fs::path guidance;
    std::size_t workers = 1;
    bool resume = false;
    bool reset = false;
    bool strip_dead = false;
    std::string program;
};

struct Setup {
    corpus::Corpus corpus;
    pipeline::PipelineConfig config;
    std::vector<prompt::GuidanceEntry> kb;
    std::unique_ptr<llm::Gateway> gateway;
};

Setup prepare(const RunArgs& a) {
    Setup s;
    s.corpus = corpus::load_corpus(a.corpus, {.strip_dead_functions = a.strip_dead});
    for (const auto& w : s.corpus.warnings) std::cerr << "warning: " << w.program_id << ": " << w.message << "\n";
    if (!a.config.empty()) s.config = pipeline::load_pipeline_config(a.config);
    s.kb = prompt::load_knowledge_base(a.guidance.empty() ? prompt::default_guidance_dir() : a.guidance);
    auto specs = llm::load_backend_config(a.backends);
    s.gateway = std::make_unique<llm::Gateway>(llm::make_backend(llm::find_backend(specs, a.backend)));
    return s;
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--corpus", a.corpus, "corpus root")->required();
    cmd->add_option("--backend", a.backend, "backend name from the backend config")->required();
    cmd->add_option("--backends", a.backends, "backend config file")->capture_default_str();
    cmd->add_option("--out", a.out, "run directory")->required();
    cmd->add_option("--config", a.config, "pipeline config (JSON)");
    cmd->add_option("--guidance", a.guidance, "knowledge base directory");
    cmd->add_flag("--strip-dead", a.strip_dead, "remove functions unreachable from main");
}

int cmd_run(const RunArgs& a) {
    if (a.reset) pipeline::reset_run(a.out);
    auto s = prepare(a);
    pipeline::CampaignOptions opts;
    opts.run_dir = a.out;
    opts.workers = a.workers;
    opts.resume = a.resume;
    opts.stop = g_stop.get_token();
    opts.on_complete = [](const pipeline::Transcript& t) {
        std::cout << t.program_id << " " << pipeline::to_string(t.outcome) << " (" << t.iterations.total()
                  << " iterations)\n";
    };
    auto result = pipeline::run_campaign(s.corpus, *s.gateway, s.config, s.kb, opts);
    std::cout << "executed " << result.executed << ", completed " << result.state.completed.size() << "/"
              << s.corpus.programs.size() << "\n";
    return result.finished ? 0 : 1;
}

int cmd_translate_one(const RunArgs& a) {
    auto s = prepare(a);
    const auto* program = s.corpus.find(a.program);
    if (!program) throw std::runtime_error("no such program: " + a.program);
    const fs::path dir = a.out / program->id;
    fs::remove_all(dir);
    fs::create_directories(dir);
    pipeline::JsonlTranscriptWriter writer(dir, s.config.digest(s.kb, s.gateway->spec().name));
    pipeline::PipelineContext ctx{s.config, s.kb, dir, &writer};
    auto t = pipeline::translate_program(*program, *s.gateway, ctx);
    std::cout << t.program_id << " " << pipeline::to_string(t.outcome) << " (" << t.iterations.total()
              << " iterations)\n";
    return t.outcome == pipeline::OutcomeKind::success ? 0 : 1;
}

int cmd_report(const fs::path& run, const std::string& format, const fs::path& corpus_dir, const fs::path& out) {
    auto transcripts = pipeline::load_run(run);
    if (transcripts.empty()) throw std::runtime_error("no completed transcripts in " + run.string());
    auto metrics = corpus_dir.empty() ? report::metrics_from_transcripts(transcripts)
                                      : report::metrics_from_corpus(corpus::load_corpus(corpus_dir));
    auto r = report::build_report(transcripts, metrics);
    if (format == "csv") {
        const fs::path dir = out.empty() ? run / "report" : out;
        report::write_csv_tables(r, dir);
        std::cout << "wrote CSV tables to " << dir.string() << "\n";
    } else if (out.empty()) {
        std::cout << report::to_json(r) << "\n";
    } else {
        spit(out, report::to_json(r) + "\n");
    }
    return 0;
}

json finding_json(const vuln::Finding& f) {
    json j{{"vuln_type", vuln::to_string(f.vuln_type)}, {"location", f.location}, {"raw", f.raw}};
    j["trigger_input"] = f.trigger_input ? json(*f.trigger_input) : json(nullptr);
    return j;
}

vuln::Finding finding_from_json(const json& j) {
    vuln::Finding f;
    f.vuln_type = vuln::vuln_type_from_string(j.at("vuln_type").get<std::string>());
    f.location = j.value("location", "");
    f.raw = j.value("raw", "");
    if (j.contains("trigger_input") && !j["trigger_input"].is_null()) f.trigger_input = j["trigger_input"].get<std::string>();
    return f;
}

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::max<std::size_t>(1, workers); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !g_stop.stop_requested(); i = next++) fn(i);
        });
    }
}

int cmd_vulnscan(const fs::path& corpus_dir, const fs::path& out, const vuln::CheckerConfig& cfg, std::size_t workers) {
    if (!vuln::checker_available(cfg)) {
        std::cerr << "notice: checker '" << cfg.command << "' not found; vulnerability scan disabled\n";
        return 2;
    }
    auto c = corpus::load_corpus(corpus_dir);
    std::vector<vuln::VerificationOutcome> outcomes(c.programs.size());
    parallel_for(c.programs.size(), workers, [&](std::size_t i) {
        const auto& p = c.programs[i];
        outcomes[i] = vuln::verify_c_program(p, cfg, out / p.id);
        json j{{"program_id", p.id},
               {"kind", vuln::to_string(outcomes[i].kind)},
               {"duration_ms", outcomes[i].duration.count()},
               {"detail", outcomes[i].detail},
               {"findings", json::array()}};
        for (const auto& f : outcomes[i].findings) j["findings"].push_back(finding_json(f));
        spit(out / p.id / "findings.json", j.dump(2) + "\n");
    });
    std::map<std::string, std::size_t> kinds, types;
    for (const auto& o : outcomes) {
        ++kinds[std::string(vuln::to_string(o.kind))];
        for (const auto& f : o.findings) ++types[std::string(vuln::to_string(f.vuln_type))];
    }
    json summary{{"checker", {{"command", cfg.command}, {"args", cfg.args}, {"timeout_ms", cfg.timeout.count()}}},
                 {"outcomes", kinds},
                 {"vuln_types", types}};
    spit(out / "scan.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_mitigate(const fs::path& run, const fs::path& scan, std::size_t workers) {
    auto transcripts = pipeline::load_run(run);
    struct Job {
        std::string id;
        fs::path binary;
        std::vector<vuln::Finding> findings;
    };
    std::vector<Job> jobs;
    for (const auto& t : transcripts) {
        if (t.outcome != pipeline::OutcomeKind::success) continue;
        const fs::path fj = scan / t.program_id / "findings.json";
        if (!fs::exists(fj)) continue;
        auto j = json::parse(slurp(fj));
        if (j.value("kind", "") != "failed") continue;
        Job job{t.program_id, {}, {}};
        for (auto it = t.attempts.rbegin(); it != t.attempts.rend(); ++it) {
            if (it->compile && it->compile->ok() && it->compile->binary_path) {
                job.binary = *it->compile->binary_path;
                break;
            }
        }
        if (job.binary.empty()) continue;
        for (const auto& f : j["findings"]) job.findings.push_back(finding_from_json(f));
        const fs::path override_trigger = scan / t.program_id / "trigger.txt";
        if (fs::exists(override_trigger)) {
            auto text = slurp(override_trigger);
            for (auto& f : job.findings) f.trigger_input = text;
        }
        jobs.push_back(std::move(job));
    }

    std::vector<json> results(jobs.size());
    vuln::ContingencyTable table;
    std::mutex table_mutex;
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        json entry{{"program_id", job.id}, {"replays", json::array()}};
        std::optional<vuln::CBinaries> c;
        std::string build_error;
        try {
            c = vuln::build_c_binaries(slurp(scan / job.id / "main.c"), run / job.id / "c-build");
        } catch (const std::exception& e) {
            build_error = e.what();
        }
        std::map<std::string, vuln::MitigationVerdict> by_trigger;
        for (const auto& f : job.findings) {
            vuln::MitigationVerdict v;
            if (!c) {
                v.reason = "C build failed: " + build_error;
            } else if (f.trigger_input && by_trigger.count(*f.trigger_input)) {
                v = by_trigger[*f.trigger_input];
            } else {
                v = vuln::replay_mitigation(*c, job.binary, f.trigger_input);
                if (f.trigger_input) by_trigger[*f.trigger_input] = v;
            }
            entry["replays"].push_back({{"finding", finding_json(f)},
                                        {"verdict", vuln::to_string(v.kind)},
                                        {"c_behavior", v.c_behavior},
                                        {"translated_behavior", v.translated_behavior},
                                        {"c_build", v.c_build},
                                        {"reason", v.reason}});
            std::lock_guard lock(table_mutex);
            table.add(f.vuln_type, v.kind);
        }
        results[i] = std::move(entry);
    });

    json out{{"programs", results}, {"contingency", json::object()}};
    for (const auto& [type, row] : table.cells) {
        json r;
        for (const auto& [kind, n] : row) r[std::string(vuln::to_string(kind))] = n;
        out["contingency"][std::string(vuln::to_string(type))] = r;
    }
    spit(run / "mitigation.json", out.dump(2) + "\n");
    std::cout << out["contingency"].dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"C to Rust translation campaigns with compiler-feedback repair"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "translate every corpus program");
    add_run_options(run, run_args);
    run->add_option("--workers", run_args.workers, "parallel programs")->check(CLI::PositiveNumber);
    run->add_flag("--resume", run_args.resume, "continue an interrupted run");
    run->add_flag("--reset", run_args.reset, "discard existing state and records first");

    RunArgs one_args;
    auto* one = app.add_subcommand("translate-one", "translate a single program");
    add_run_options(one, one_args);
    one->add_option("--program", one_args.program, "program id")->required();

    fs::path report_run, report_corpus, report_out;
    std::string report_format = "json";
    auto* rep = app.add_subcommand("report", "compute campaign metrics");
    rep->add_option("--run", report_run, "run directory")->required();
    rep->add_option("--format", report_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    rep->add_option("--corpus", report_corpus, "corpus root, for metrics of the unstripped sources");
    rep->add_option("--out", report_out, "output file (json) or directory (csv)");

    fs::path scan_corpus, scan_out;
    vuln::CheckerConfig checker;
    long checker_timeout_s = 30;
    std::size_t scan_workers = 1;
    auto* scan = app.add_subcommand("vulnscan", "run the bounded model checker over a corpus");
    scan->add_option("--corpus", scan_corpus)->required();
    scan->add_option("--out", scan_out)->required();
    scan->add_option("--checker", checker.command)->capture_default_str();
    scan->add_option("--checker-args", checker.args, "replaces the default checker flags")->expected(0, -1);
    scan->add_option("--timeout", checker_timeout_s, "seconds")->capture_default_str();
    scan->add_option("--workers", scan_workers)->check(CLI::PositiveNumber);

    fs::path mit_run, mit_scan;
    std::size_t mit_workers = 1;
    auto* mit = app.add_subcommand("mitigate", "replay checker triggers against translations");
    mit->add_option("--run", mit_run)->required();
    mit->add_option("--scan", mit_scan)->required();
    mit->add_option("--workers", mit_workers)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);

    try {
        if (*run) return cmd_run(run_args);
        if (*one) return cmd_translate_one(one_args);
        if (*rep) return cmd_report(report_run, report_format, report_corpus, report_out);
        if (*scan) {
            checker.timeout = std::chrono::seconds(checker_timeout_s);
            return cmd_vulnscan(scan_corpus, scan_out, checker, scan_workers);
        }
        if (*mit) return cmd_mitigate(mit_run, mit_scan, mit_workers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
