#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rustport/corpus.hpp"
#include "rustport/orchestrator.hpp"

namespace rustport::report {

using pipeline::OutcomeKind;
using pipeline::Transcript;

/// Fraction of programs whose outcome is success. Throws std::invalid_argument on empty input.
double computational_accuracy(std::span<const Transcript> transcripts);

struct RepairRates {
    std::size_t initial_failures = 0;
    std::size_t repaired = 0;
    std::size_t passed = 0;  // repaired and finally successful
    std::optional<double> repair_rate;
    std::optional<double> pass_rate;

    bool operator==(const RepairRates&) const = default;
};

RepairRates rates_from_counts(std::size_t initial_failures, std::size_t repaired, std::size_t passed);

/// Programs whose first translation failed to compile, how many of those the
/// basic/guided compile-repair phases fixed, and how many of those then passed.
RepairRates repair_and_pass_rates(std::span<const Transcript> transcripts);

struct Resolution {
    std::size_t initial = 0;
    std::size_t remaining = 0;
    double rr = 0.0;  // 1 - remaining/initial, 0 when initial == 0

    bool operator==(const Resolution&) const = default;
};

Resolution resolution_from_counts(std::size_t initial, std::size_t remaining);

/// Error instances of `code` at guided-phase entry (last basic-repair compile)
/// versus after the last guided-repair compile, over programs that entered guided repair.
Resolution resolution_rate(std::string_view code, std::span<const Transcript> transcripts);

enum class ErrorPoint { base, post_basic_repair };

struct ErrorDistribution {
    std::size_t total = 0;  // coded error-level diagnostics
    std::map<std::string, std::size_t> counts;
    std::map<std::string, double> shares;

    bool operator==(const ErrorDistribution&) const = default;
};

ErrorDistribution error_distribution(std::span<const Transcript> transcripts, ErrorPoint at);

enum class Metric { loc, pointers, functions };

std::string_view to_string(Metric metric);

struct CdfSet {
    std::vector<std::size_t> values;                          // distinct metric values, ascending
    std::map<OutcomeKind, std::vector<double>> curves;        // fraction of all programs <= value, per outcome

    bool operator==(const CdfSet&) const = default;
};

using MetricsById = std::map<std::string, corpus::CodeMetrics, std::less<>>;

MetricsById metrics_from_transcripts(std::span<const Transcript> transcripts);
MetricsById metrics_from_corpus(const corpus::Corpus& corpus);

/// Throws std::invalid_argument if a transcript's program has no metrics.
CdfSet cdf_by_metric(std::span<const Transcript> transcripts, const MetricsById& metrics, Metric metric);

struct CampaignReport {
    std::size_t programs = 0;
    double ca = 0.0;
    std::map<OutcomeKind, std::size_t> outcome_counts;
    std::map<OutcomeKind, double> outcome_breakdown;
    RepairRates rates;
    std::map<std::string, Resolution> resolution;  // the guided-repair target codes
    ErrorDistribution distribution_base;
    ErrorDistribution distribution_post_basic;
    std::map<Metric, CdfSet> cdfs;

    bool operator==(const CampaignReport&) const = default;
};

CampaignReport build_report(std::span<const Transcript> transcripts, const MetricsById& metrics);

std::string to_json(const CampaignReport& report);
CampaignReport report_from_json(std::string_view text);

/// File name -> CSV content: ca.csv, rates.csv, resolution.csv, distribution.csv, cdf_<metric>.csv.
std::map<std::string, std::string> to_csv_tables(const CampaignReport& report);
void write_csv_tables(const CampaignReport& report, const std::filesystem::path& dir);

}  // namespace rustport::report
