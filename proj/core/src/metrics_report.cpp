#include "rustport/metrics_report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace rustport::report {

namespace {

using pipeline::Phase;

const build::CompileResult* last_compile_in(const Transcript& t, std::initializer_list<Phase> phases) {
    const build::CompileResult* found = nullptr;
    for (const auto& a : t.attempts) {
        if (a.compile && std::find(phases.begin(), phases.end(), a.phase) != phases.end()) found = &*a.compile;
    }
    return found;
}

bool initial_failure(const Transcript& t) {
    return !t.attempts.empty() && t.attempts.front().compile && !t.attempts.front().compile->ok();
}

bool repaired_by_compile_repair(const Transcript& t) {
    if (!initial_failure(t)) return false;
    return std::any_of(t.attempts.begin(), t.attempts.end(), [](const pipeline::Attempt& a) {
        return (a.phase == Phase::basic_repair || a.phase == Phase::guided_repair) && a.compile && a.compile->ok();
    });
}

std::size_t count_code(const build::CompileResult* r, std::string_view code) {
    if (!r || r->ok()) return 0;
    std::size_t n = 0;
    for (const auto& d : r->diagnostics) {
        if (d.level == build::Level::error && d.code && *d.code == code) ++n;
    }
    return n;
}

void add_codes(ErrorDistribution& dist, const build::CompileResult* r) {
    if (!r || r->ok()) return;
    for (const auto& d : r->diagnostics) {
        if (d.level == build::Level::error && d.code) {
            ++dist.counts[*d.code];
            ++dist.total;
        }
    }
}

std::size_t metric_value(const corpus::CodeMetrics& m, Metric metric) {
    switch (metric) {
        case Metric::loc: return m.loc;
        case Metric::pointers: return m.pointers;
        case Metric::functions: return m.functions;
    }
    return 0;
}

Metric metric_from_string(std::string_view text) {
    for (auto m : {Metric::loc, Metric::pointers, Metric::functions}) {
        if (to_string(m) == text) return m;
    }
    throw std::invalid_argument("unknown metric: " + std::string(text));
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json distribution_json(const ErrorDistribution& d) {
    return {{"total", d.total}, {"counts", d.counts}, {"shares", d.shares}};
}

ErrorDistribution distribution_from(const json& j) {
    ErrorDistribution d;
    d.total = j.at("total").get<std::size_t>();
    d.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
    d.shares = j.at("shares").get<std::map<std::string, double>>();
    return d;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fmt_optional(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

}  // namespace

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::loc: return "loc";
        case Metric::pointers: return "pointers";
        case Metric::functions: return "functions";
    }
    return "loc";
}

double computational_accuracy(std::span<const Transcript> transcripts) {
    if (transcripts.empty()) throw std::invalid_argument("computational_accuracy: no transcripts");
    auto ok = std::count_if(transcripts.begin(), transcripts.end(),
                            [](const Transcript& t) { return t.outcome == OutcomeKind::success; });
    return static_cast<double>(ok) / static_cast<double>(transcripts.size());
}

RepairRates rates_from_counts(std::size_t initial_failures, std::size_t repaired, std::size_t passed) {
    if (repaired > initial_failures || passed > repaired) {
        throw std::invalid_argument("rates_from_counts: counts must satisfy passed <= repaired <= failures");
    }
    RepairRates r{initial_failures, repaired, passed, std::nullopt, std::nullopt};
    if (initial_failures > 0) r.repair_rate = static_cast<double>(repaired) / static_cast<double>(initial_failures);
    if (repaired > 0) r.pass_rate = static_cast<double>(passed) / static_cast<double>(repaired);
    return r;
}

RepairRates repair_and_pass_rates(std::span<const Transcript> transcripts) {
    std::size_t failures = 0, repaired = 0, passed = 0;
    for (const auto& t : transcripts) {
        if (!initial_failure(t)) continue;
        ++failures;
        if (!repaired_by_compile_repair(t)) continue;
        ++repaired;
        if (t.outcome == OutcomeKind::success) ++passed;
    }
    return rates_from_counts(failures, repaired, passed);
}

Resolution resolution_from_counts(std::size_t initial, std::size_t remaining) {
    Resolution r{initial, remaining, 0.0};
    if (initial > 0) r.rr = 1.0 - static_cast<double>(remaining) / static_cast<double>(initial);
    return r;
}

Resolution resolution_rate(std::string_view code, std::span<const Transcript> transcripts) {
    std::size_t initial = 0, remaining = 0;
    for (const auto& t : transcripts) {
        if (t.iterations.guided_repair == 0) continue;
        const auto* entry = last_compile_in(t, {Phase::base, Phase::basic_repair});
        const auto* exit_point = last_compile_in(t, {Phase::guided_repair});
        if (!exit_point) exit_point = entry;
        initial += count_code(entry, code);
        remaining += count_code(exit_point, code);
    }
    return resolution_from_counts(initial, remaining);
}

ErrorDistribution error_distribution(std::span<const Transcript> transcripts, ErrorPoint at) {
    ErrorDistribution dist;
    for (const auto& t : transcripts) {
        if (!initial_failure(t)) continue;
        if (at == ErrorPoint::base) {
            add_codes(dist, &*t.attempts.front().compile);
        } else {
            add_codes(dist, last_compile_in(t, {Phase::base, Phase::basic_repair}));
        }
    }
    for (const auto& [code, n] : dist.counts) {
        dist.shares[code] = static_cast<double>(n) / static_cast<double>(dist.total);
    }
    return dist;
}

MetricsById metrics_from_transcripts(std::span<const Transcript> transcripts) {
    MetricsById out;
    for (const auto& t : transcripts) out[t.program_id] = t.metrics;
    return out;
}

MetricsById metrics_from_corpus(const corpus::Corpus& corpus) {
    MetricsById out;
    for (const auto& p : corpus.programs) out[p.id] = p.metrics;
    return out;
}

CdfSet cdf_by_metric(std::span<const Transcript> transcripts, const MetricsById& metrics, Metric metric) {
    CdfSet set;
    std::vector<std::pair<std::size_t, OutcomeKind>> rows;
    for (const auto& t : transcripts) {
        auto it = metrics.find(t.program_id);
        if (it == metrics.end()) throw std::invalid_argument("no metrics for program " + t.program_id);
        rows.emplace_back(metric_value(it->second, metric), t.outcome);
    }
    std::set<std::size_t> distinct;
    for (const auto& r : rows) distinct.insert(r.first);
    set.values.assign(distinct.begin(), distinct.end());
    const double total = static_cast<double>(rows.size());
    for (auto kind : pipeline::kAllOutcomes) {
        std::vector<double> curve;
        curve.reserve(set.values.size());
        std::vector<std::size_t> sorted;
        for (const auto& r : rows) {
            if (r.second == kind) sorted.push_back(r.first);
        }
        std::sort(sorted.begin(), sorted.end());
        std::size_t cursor = 0;
        for (std::size_t v : set.values) {
            while (cursor < sorted.size() && sorted[cursor] <= v) ++cursor;
            curve.push_back(static_cast<double>(cursor) / total);
        }
        set.curves[kind] = std::move(curve);
    }
    return set;
}

CampaignReport build_report(std::span<const Transcript> transcripts, const MetricsById& metrics) {
    CampaignReport r;
    r.programs = transcripts.size();
    r.ca = computational_accuracy(transcripts);
    for (auto kind : pipeline::kAllOutcomes) r.outcome_counts[kind] = 0;
    for (const auto& t : transcripts) ++r.outcome_counts[t.outcome];
    for (const auto& [kind, n] : r.outcome_counts) {
        r.outcome_breakdown[kind] = static_cast<double>(n) / static_cast<double>(r.programs);
    }
    r.rates = repair_and_pass_rates(transcripts);
    for (auto code : prompt::guided_target_codes()) r.resolution[std::string(code)] = resolution_rate(code, transcripts);
    r.distribution_base = error_distribution(transcripts, ErrorPoint::base);
    r.distribution_post_basic = error_distribution(transcripts, ErrorPoint::post_basic_repair);
    for (auto m : {Metric::loc, Metric::pointers, Metric::functions}) r.cdfs[m] = cdf_by_metric(transcripts, metrics, m);
    return r;
}

std::string to_json(const CampaignReport& r) {
    json outcomes = json::object();
    for (auto kind : pipeline::kAllOutcomes) {
        outcomes[std::string(pipeline::to_string(kind))] = {{"count", r.outcome_counts.at(kind)},
                                                            {"ratio", r.outcome_breakdown.at(kind)}};
    }
    json resolution = json::object();
    for (const auto& [code, res] : r.resolution) {
        resolution[code] = {{"initial", res.initial}, {"remaining", res.remaining}, {"rr", res.rr}};
    }
    json cdf = json::object();
    for (const auto& [metric, set] : r.cdfs) {
        json curves = json::object();
        for (const auto& [kind, curve] : set.curves) curves[std::string(pipeline::to_string(kind))] = curve;
        cdf[std::string(to_string(metric))] = {{"values", set.values}, {"curves", curves}};
    }
    json doc = {
        {"programs", r.programs},
        {"ca", r.ca},
        {"outcomes", outcomes},
        {"repair",
         {{"initial_failures", r.rates.initial_failures},
          {"repaired", r.rates.repaired},
          {"passed", r.rates.passed},
          {"repair_rate", optional_json(r.rates.repair_rate)},
          {"pass_rate", optional_json(r.rates.pass_rate)}}},
        {"resolution", resolution},
        {"error_distribution",
         {{"base", distribution_json(r.distribution_base)},
          {"post_basic_repair", distribution_json(r.distribution_post_basic)}}},
        {"cdf", cdf},
    };
    return doc.dump(2) + "\n";
}

CampaignReport report_from_json(std::string_view text) {
    CampaignReport r;
    try {
        json j = json::parse(text);
        r.programs = j.at("programs").get<std::size_t>();
        r.ca = j.at("ca").get<double>();
        for (const auto& [name, v] : j.at("outcomes").items()) {
            auto kind = pipeline::outcome_from_string(name);
            r.outcome_counts[kind] = v.at("count").get<std::size_t>();
            r.outcome_breakdown[kind] = v.at("ratio").get<double>();
        }
        const json& rep = j.at("repair");
        r.rates.initial_failures = rep.at("initial_failures").get<std::size_t>();
        r.rates.repaired = rep.at("repaired").get<std::size_t>();
        r.rates.passed = rep.at("passed").get<std::size_t>();
        r.rates.repair_rate = optional_from(rep.at("repair_rate"));
        r.rates.pass_rate = optional_from(rep.at("pass_rate"));
        for (const auto& [code, v] : j.at("resolution").items()) {
            r.resolution[code] = {v.at("initial").get<std::size_t>(), v.at("remaining").get<std::size_t>(),
                                  v.at("rr").get<double>()};
        }
        r.distribution_base = distribution_from(j.at("error_distribution").at("base"));
        r.distribution_post_basic = distribution_from(j.at("error_distribution").at("post_basic_repair"));
        for (const auto& [name, v] : j.at("cdf").items()) {
            CdfSet set;
            set.values = v.at("values").get<std::vector<std::size_t>>();
            for (const auto& [kind, curve] : v.at("curves").items()) {
                set.curves[pipeline::outcome_from_string(kind)] = curve.get<std::vector<double>>();
            }
            r.cdfs[metric_from_string(name)] = std::move(set);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("report: ") + e.what());
    }
    return r;
}

std::map<std::string, std::string> to_csv_tables(const CampaignReport& r) {
    std::map<std::string, std::string> files;

    std::string ca = "metric,count,ratio\n";
    ca += "ca," + std::to_string(r.outcome_counts.at(OutcomeKind::success)) + "," + fmt_double(r.ca) + "\n";
    for (auto kind : pipeline::kAllOutcomes) {
        ca += std::string(pipeline::to_string(kind)) + "," + std::to_string(r.outcome_counts.at(kind)) + "," +
              fmt_double(r.outcome_breakdown.at(kind)) + "\n";
    }
    files["ca.csv"] = ca;

    files["rates.csv"] = "initial_failures,repaired,passed,repair_rate,pass_rate\n" +
                         std::to_string(r.rates.initial_failures) + "," + std::to_string(r.rates.repaired) + "," +
                         std::to_string(r.rates.passed) + "," + fmt_optional(r.rates.repair_rate) + "," +
                         fmt_optional(r.rates.pass_rate) + "\n";

    std::string res = "code,initial,remaining,rr\n";
    for (const auto& [code, v] : r.resolution) {
        res += code + "," + std::to_string(v.initial) + "," + std::to_string(v.remaining) + "," + fmt_double(v.rr) + "\n";
    }
    files["resolution.csv"] = res;

    std::string dist = "point,code,count,share\n";
    for (const auto& [point, d] : {std::pair{"base", &r.distribution_base},
                                   std::pair{"post_basic_repair", &r.distribution_post_basic}}) {
        for (const auto& [code, n] : d->counts) {
            dist += std::string(point) + "," + code + "," + std::to_string(n) + "," + fmt_double(d->shares.at(code)) + "\n";
        }
    }
    files["distribution.csv"] = dist;

    for (const auto& [metric, set] : r.cdfs) {
        std::string csv = "value";
        for (auto kind : pipeline::kAllOutcomes) csv += "," + std::string(pipeline::to_string(kind));
        csv += "\n";
        for (std::size_t i = 0; i < set.values.size(); ++i) {
            csv += std::to_string(set.values[i]);
            for (auto kind : pipeline::kAllOutcomes) csv += "," + fmt_double(set.curves.at(kind)[i]);
            csv += "\n";
        }
        files["cdf_" + std::string(to_string(metric)) + ".csv"] = csv;
    }
    return files;
}

void write_csv_tables(const CampaignReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : to_csv_tables(report)) {
        std::ofstream out(dir / name, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        out << content;
    }
}

}  // namespace rustport::report
