#include "caft/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "caft/errors.hpp"
#include "caft/switch_tables.hpp"
#include "caft/workload.hpp"

namespace caft {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    T v{};
    if (!(in >> v) || !(in >> std::ws).eof())
        throw ConfigError(fmt::format("key '{}': cannot parse '{}'", key, text));
    return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
    std::vector<T> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_number<T>(item, key));
    if (out.empty()) throw ConfigError(fmt::format("key '{}': empty list", key));
    return out;
}

double t_quantile_975(std::size_t n) {
    if (n < 2) return 0.0;
    boost::math::students_t dist(static_cast<double>(n - 1));
    return boost::math::quantile(dist, 0.975);
}

struct MeanCi {
    double mean = 0;
    double half = 0;
};

MeanCi mean_ci(const std::vector<double>& v) {
    MeanCi r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    r.half = t_quantile_975(v.size()) * sd / std::sqrt(static_cast<double>(v.size()));
    return r;
}

std::string ip_string(std::uint32_t a) {
    return fmt::format("{}.{}.{}.{}", a >> 24, (a >> 16) & 0xff, (a >> 8) & 0xff, a & 0xff);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& in, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    double rtt_us = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "k") c.k = parse_number<int>(val, key);
        else if (key == "oversubscription") c.oversubscription = parse_number<int>(val, key);
        else if (key == "link_capacity_bps") c.link_capacity_bps = parse_number<double>(val, key);
        else if (key == "schemes") {
            c.schemes.clear();
            for (const auto& s : split(val, ',')) c.schemes.push_back(scheme_from_string(s));
        } else if (key == "size_cdf") {
            std::filesystem::path p = val;
            c.size_cdf = p.is_absolute() ? p : base_dir / p;
        } else if (key == "loads") c.loads = parse_list<double>(val, key);
        else if (key == "flow_count") c.flow_count = parse_number<std::size_t>(val, key);
        else if (key == "failures") c.failures = parse_list<int>(val, key);
        else if (key == "seeds") c.seeds = parse_list<std::uint64_t>(val, key);
        else if (key == "t_dre_us") c.engine.dre.t_dre_s = parse_number<double>(val, key) * 1e-6;
        else if (key == "alpha") c.engine.dre.alpha = parse_number<double>(val, key);
        else if (key == "pat_timeout_ms") c.engine.pat_timeout = from_seconds(parse_number<double>(val, key) * 1e-3);
        else if (key == "pat_size") c.engine.pat_size = parse_number<std::size_t>(val, key);
        else if (key == "retry_timeout_ms") c.engine.retry_timeout = from_seconds(parse_number<double>(val, key) * 1e-3);
        else if (key == "max_retries") c.engine.max_retries = parse_number<int>(val, key);
        else if (key == "fabric_rtt_us") rtt_us = parse_number<double>(val, key);
        else if (key == "output_dir") c.output_dir = val;
        else if (key == "jobs") c.jobs = parse_number<int>(val, key);
        else throw ConfigError(fmt::format("line {}: unknown key '{}'", lineno, key));
    }
    if (rtt_us >= 0) {
        if (!(rtt_us > 0)) throw ConfigError("fabric_rtt_us must be positive");
        c.engine.per_hop_latency = from_seconds(rtt_us * 1e-6 / 8.0);
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    auto c = parse(in, path.parent_path());
    return c;
}

void ExperimentConfig::validate() const {
    (void)FatTree::build(k, oversubscription, link_capacity_bps);
    engine.validate();
    if (schemes.empty()) throw ConfigError("no schemes");
    if (seeds.empty()) throw ConfigError("no seeds");
    if (flow_count == 0) throw ConfigError("flow_count must be positive");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    for (double l : loads)
        if (!(l > 0)) throw ConfigError("loads must be positive");
    for (int f : failures)
        if (f < 0) throw ConfigError("failure counts must be >= 0");
    if (!std::filesystem::exists(size_cdf))
        throw ConfigError(fmt::format("size CDF '{}' does not exist", size_cdf.string()));
}

std::uint64_t workload_seed(std::uint64_t seed, double load) {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(std::llround(load * 1e6))));
}

std::uint64_t failure_seed(std::uint64_t seed, int failures) {
    return mix64(mix64(seed) + 0xfa11ULL * static_cast<std::uint64_t>(failures + 1));
}

std::string flow_csv_name(SchemeKind scheme, double load, int failures, std::uint64_t seed) {
    return fmt::format("flows_{}_load{:.2f}_fail{}_seed{}.csv", to_string(scheme), load, failures, seed);
}

const std::vector<std::string>& flow_csv_columns() {
    static const std::vector<std::string> cols{
        "flow_id",  "scheme",       "load",      "failures", "seed",       "src_host",     "dst_host",
        "src_ip",   "dst_ip",       "src_port",  "dst_port", "protocol",   "size_bytes",   "arrival_s",
        "start_s",  "completion_s", "fct_s",     "throughput_bps", "agg",  "core",         "retries",
        "state"};
    return cols;
}

void write_flow_csv(std::ostream& out, const std::vector<FlowRecord>& flows, SchemeKind scheme, double load,
                    int failures, std::uint64_t seed) {
    const auto& cols = flow_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& f : flows) {
        const bool done = f.state == FlowState::done;
        fmt::print(out, "{},{},{:.2f},{},{},{},{},{},{},{},{},{},{},{},", f.id, to_string(scheme), load, failures, seed,
                   f.src_host, f.dst_host, ip_string(f.tuple.src_ip), ip_string(f.tuple.dst_ip), f.tuple.src_port,
                   f.tuple.dst_port, f.tuple.protocol, f.size_bytes, format_seconds(f.arrival));
        if (done)
            fmt::print(out, "{},{},{},{:.6f},", format_seconds(f.start), format_seconds(f.completion),
                       format_seconds(f.completion - f.arrival), f.throughput_bps());
        else
            out << ",,,,";
        if (f.path)
            fmt::print(out, "{},{},", f.path->agg_index, f.path->core_member);
        else
            out << "-1,-1,";
        fmt::print(out, "{},{}\n", f.retries, to_string(f.state));
    }
}

std::vector<std::filesystem::path> flow_csvs_in(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) throw ParseError(fmt::format("'{}' is not a directory", dir.string()));
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with("flows_") && name.ends_with(".csv")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& csvs, std::ostream* warnings) {
    struct SeedStats {
        double fct_sum = 0, tput_sum = 0;
        std::size_t done = 0, failed = 0;
    };
    // (failures, load x 100, scheme) -> seed -> stats
    using Key = std::tuple<int, long long, std::string>;
    std::map<Key, std::map<std::uint64_t, SeedStats>> groups;

    const auto& cols = flow_csv_columns();
    std::string expected_header;
    for (std::size_t i = 0; i < cols.size(); ++i) expected_header += (i ? "," : "") + cols[i];
    auto col = [&](const char* name) {
        return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
    };
    const auto c_scheme = col("scheme"), c_load = col("load"), c_fail = col("failures"), c_seed = col("seed"),
               c_fct = col("fct_s"), c_tput = col("throughput_bps"), c_state = col("state");

    for (const auto& path : csvs) {
        std::ifstream in(path);
        if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
        std::string line;
        if (!std::getline(in, line) || trim(line) != expected_header)
            throw ParseError(fmt::format("{}: header does not match the flow CSV schema", path.string()));
        int lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            const auto f = split(line, ',');
            if (f.size() != cols.size())
                throw ParseError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno, cols.size(), f.size()));
            const Key key{std::stoi(f[c_fail]), std::llround(std::stod(f[c_load]) * 100), f[c_scheme]};
            auto& s = groups[key][std::stoull(f[c_seed])];
            if (f[c_state] == "done") {
                s.fct_sum += std::stod(f[c_fct]);
                s.tput_sum += std::stod(f[c_tput]);
                ++s.done;
            } else {
                ++s.failed;
            }
        }
    }

    // Per-seed ECMP mean FCT for normalization.
    std::map<std::tuple<int, long long, std::uint64_t>, double> ecmp_fct;
    for (const auto& [key, seeds] : groups)
        if (std::get<2>(key) == "ecmp")
            for (const auto& [seed, s] : seeds)
                if (s.done > 0) ecmp_fct[{std::get<0>(key), std::get<1>(key), seed}] = s.fct_sum / static_cast<double>(s.done);

    std::vector<SummaryRow> rows;
    for (const auto& [key, seeds] : groups) {
        SummaryRow row;
        row.failures = std::get<0>(key);
        row.load = static_cast<double>(std::get<1>(key)) / 100.0;
        row.scheme = std::get<2>(key);
        std::vector<double> fct, tput, norm;
        bool all_norm = true;
        for (const auto& [seed, s] : seeds) {
            row.done_flows += s.done;
            row.failed_flows += s.failed;
            if (s.done == 0) continue;
            const double m = s.fct_sum / static_cast<double>(s.done);
            fct.push_back(m);
            tput.push_back(s.tput_sum / static_cast<double>(s.done));
            auto it = ecmp_fct.find({row.failures, std::get<1>(key), seed});
            if (it != ecmp_fct.end())
                norm.push_back(m / it->second);
            else
                all_norm = false;
        }
        if (fct.empty()) {
            if (warnings)
                fmt::print(*warnings, "warning: no completed flows for scheme={} load={:.2f} failures={}; omitted\n",
                           row.scheme, row.load, row.failures);
            continue;
        }
        row.seeds = fct.size();
        const auto f = mean_ci(fct), t = mean_ci(tput);
        row.mean_fct_s = f.mean;
        row.fct_ci95_s = f.half;
        row.mean_throughput_bps = t.mean;
        row.throughput_ci95_bps = t.half;
        if (all_norm && !norm.empty()) {
            const auto n = mean_ci(norm);
            row.norm_fct = n.mean;
            row.norm_fct_ci95 = n.half;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << "scheme,load,failures,seeds,mean_fct_s,fct_ci95_s,mean_throughput_bps,throughput_ci95_bps,done_flows,"
           "failed_flows,norm_fct_vs_ecmp,norm_fct_ci95\n";
    for (const auto& r : rows) {
        fmt::print(out, "{},{:.2f},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{},{},", r.scheme, r.load, r.failures, r.seeds,
                   r.mean_fct_s, r.fct_ci95_s, r.mean_throughput_bps, r.throughput_ci95_bps, r.done_flows,
                   r.failed_flows);
        if (r.norm_fct)
            fmt::print(out, "{:.9g},{:.9g}\n", *r.norm_fct, r.norm_fct_ci95);
        else
            out << ",\n";
    }
}

void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
    fmt::print(out, "{:<10} {:>5} {:>4} {:>5} {:>14} {:>12} {:>14} {:>8} {:>7} {:>16}\n", "scheme", "load", "fail",
               "seeds", "mean_fct_ms", "±ci95_ms", "mean_tput_Mbps", "done", "failed", "fct/ecmp");
    for (const auto& r : rows) {
        const std::string norm =
            r.norm_fct ? fmt::format("{:.3f} ±{:.3f}", *r.norm_fct, r.norm_fct_ci95) : std::string("-");
        fmt::print(out, "{:<10} {:>5.2f} {:>4} {:>5} {:>14.4f} {:>12.4f} {:>14.2f} {:>8} {:>7} {:>16}\n", r.scheme, r.load,
                   r.failures, r.seeds, r.mean_fct_s * 1e3, r.fct_ci95_s * 1e3, r.mean_throughput_bps / 1e6,
                   r.done_flows, r.failed_flows, norm);
    }
}

ExperimentOutput run_experiment(const ExperimentConfig& config, std::ostream* log) {
    config.validate();
    const FatTree topo = FatTree::build(config.k, config.oversubscription, config.link_capacity_bps);
    const SizeCdf sizes = SizeCdf::load(config.size_cdf);
    std::filesystem::create_directories(config.output_dir);

    struct Job {
        SchemeKind scheme;
        double load;
        int failures;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (int f : config.failures)
        for (double l : config.loads)
            for (auto s : config.seeds)
                for (auto sch : config.schemes) jobs.push_back({sch, l, f, s});

    std::vector<std::filesystem::path> csvs(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::string error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(mu);
                if (!error.empty()) return;
            }
            const Job& j = jobs[i];
            try {
                WorkloadSpec spec{j.load, config.flow_count, sizes};
                const auto flows = generate(topo, spec, workload_seed(j.seed, j.load));
                const auto plan = FailurePlan::random(topo, j.failures, failure_seed(j.seed, j.failures));
                const auto res = run(topo, j.scheme, flows, plan, config.engine, j.seed);
                const auto path = config.output_dir / flow_csv_name(j.scheme, j.load, j.failures, j.seed);
                std::ofstream out(path);
                if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
                write_flow_csv(out, res.flows, j.scheme, j.load, j.failures, j.seed);
                csvs[i] = path;
                if (log) {
                    std::lock_guard lock(mu);
                    fmt::print(*log, "done {} load={:.2f} failures={} seed={} ({} events)\n", to_string(j.scheme),
                               j.load, j.failures, j.seed, res.events);
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                if (error.empty())
                    error = fmt::format("run scheme={} load={:.2f} failures={} seed={} failed: {}",
                                        to_string(j.scheme), j.load, j.failures, j.seed, e.what());
                return;
            }
        }
    };

    const int nthreads = std::min<int>(config.jobs, static_cast<int>(jobs.size()));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }
    if (!error.empty()) throw std::runtime_error(error);

    ExperimentOutput out;
    out.csvs = csvs;
    std::sort(out.csvs.begin(), out.csvs.end());
    out.summary = summarize(out.csvs, log);
    std::ofstream scsv(config.output_dir / "summary.csv");
    write_summary_csv(scsv, out.summary);
    std::ofstream stxt(config.output_dir / "summary.txt");
    write_summary_table(stxt, out.summary);
    return out;
}

}  // namespace caft
