#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "caft/engine.hpp"
#include "caft/scheme.hpp"

namespace caft {

/// Experiment description. Text form is one `key = value` per line, '#'
/// comments, lists comma separated:
///
///   k, oversubscription, link_capacity_bps        topology
///   schemes                                       caft, expeditus, ecmp, optimal
///   size_cdf                                      path, relative to the config file
///   loads, flow_count                             workload
///   failures                                      failed agg-core link counts
///   seeds                                         one run per seed
///   t_dre_us, alpha, pat_timeout_ms, pat_size,
///   retry_timeout_ms, max_retries, fabric_rtt_us  protocol constants
///   output_dir, jobs
///
/// Unknown keys are rejected.
struct ExperimentConfig {
    int k = 8;
    int oversubscription = 1;
    double link_capacity_bps = 1e9;
    std::vector<SchemeKind> schemes{SchemeKind::caft, SchemeKind::expeditus, SchemeKind::ecmp, SchemeKind::optimal};
    std::filesystem::path size_cdf = "data/websearch_cdf.txt";
    std::vector<double> loads{0.6};
    std::size_t flow_count = 9000;
    std::vector<int> failures{0};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    EngineConfig engine{};
    std::filesystem::path output_dir = "results";
    int jobs = 1;

    static ExperimentConfig parse(std::istream& in, const std::filesystem::path& base_dir = ".");
    static ExperimentConfig load(const std::filesystem::path& path);

    /// Throws ConfigError on non-positive constants or a missing CDF file.
    void validate() const;
};

/// Seeds used for one (load, failure count, seed) cell; identical across
/// schemes so runs are paired.
std::uint64_t workload_seed(std::uint64_t seed, double load);
std::uint64_t failure_seed(std::uint64_t seed, int failures);

std::string flow_csv_name(SchemeKind scheme, double load, int failures, std::uint64_t seed);

/// Column list of the per-flow CSV, in order.
const std::vector<std::string>& flow_csv_columns();

void write_flow_csv(std::ostream& out, const std::vector<FlowRecord>& flows, SchemeKind scheme, double load,
                    int failures, std::uint64_t seed);

struct SummaryRow {
    std::string scheme;
    double load = 0;
    int failures = 0;
    std::size_t seeds = 0;
    double mean_fct_s = 0;
    double fct_ci95_s = 0;
    double mean_throughput_bps = 0;
    double throughput_ci95_bps = 0;
    std::size_t done_flows = 0;
    std::size_t failed_flows = 0;
    /// Mean over seeds of (scheme mean FCT / ECMP mean FCT of the same seed);
    /// nullopt when no ECMP run matches.
    std::optional<double> norm_fct;
    double norm_fct_ci95 = 0;
};

/// Aggregates per-flow CSVs. Per seed: mean FCT and throughput over done
/// flows, failed flows counted apart. Across seeds: mean of the per-seed
/// values with a Student-t 95% half-width. Rows sorted by (failures, load,
/// scheme). Groups without done flows are omitted with a warning on
/// `warnings`. Throws ParseError on mixed or malformed schemas.
std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& csvs, std::ostream* warnings = nullptr);

/// All flows_*.csv files of a directory, sorted by name.
std::vector<std::filesystem::path> flow_csvs_in(const std::filesystem::path& dir);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows);

struct ExperimentOutput {
    std::vector<std::filesystem::path> csvs;
    std::vector<SummaryRow> summary;
};

/// Runs every (scheme, load, failure count, seed) combination, writes one
/// CSV per run plus summary.csv and summary.txt into output_dir. A failing
/// run aborts with its (scheme, load, failures, seed) in the message; CSVs
/// already written are kept.
ExperimentOutput run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

}  // namespace caft
