// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional argument: flows per run (default 9000) for quick local iterations.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "caft/experiment.hpp"
#include "caft/wire_tags.hpp"
#include "maxmin_oracle.hpp"
#include "support.hpp"

using namespace caft;
using namespace caft::testing;
namespace fs = std::filesystem;

namespace {

int failures_seen = 0;

void report(bool ok, const std::string& id, const std::string& detail) {
    if (!ok) ++failures_seen;
    fmt::print("{} {}: {}\n", ok ? "PASS" : "FAIL", id, detail);
    std::fflush(stdout);
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

struct RunStats {
    double mean_fct = 0;
    std::size_t done = 0;
    std::size_t failed = 0;
    double seconds = 0;
};

RunStats run_cell(const FatTree& topo, SchemeKind scheme, const std::vector<FlowSpec>& flows, const FailurePlan& plan,
                  std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run(topo, scheme, flows, plan, EngineConfig{}, seed);
    RunStats s;
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double sum = 0;
    for (const auto& f : r.flows) {
        if (f.state == FlowState::done) {
            sum += f.fct_s();
            ++s.done;
        } else {
            ++s.failed;
        }
    }
    s.mean_fct = s.done ? sum / static_cast<double>(s.done) : 0;
    return s;
}

// (scheme) -> per-seed stats, seeds in kSeeds order
using Grid = std::map<SchemeKind, std::vector<RunStats>>;

double mean_of(const std::vector<RunStats>& v) {
    double s = 0;
    for (const auto& r : v) s += r.mean_fct;
    return s / static_cast<double>(v.size());
}

// Mean over seeds of the per-seed ratio a/b.
double paired_ratio(const std::vector<RunStats>& a, const std::vector<RunStats>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].mean_fct / b[i].mean_fct;
    return s / static_cast<double>(a.size());
}

Grid run_grid(const FatTree& topo, const SizeCdf& cdf, double load, int failed_links,
              const std::vector<SchemeKind>& schemes, std::size_t flow_count, std::ostream& log) {
    Grid g;
    for (auto seed : kSeeds) {
        const auto flows = generate(topo, WorkloadSpec{load, flow_count, cdf}, workload_seed(seed, load));
        const auto plan = FailurePlan::random(topo, failed_links, failure_seed(seed, failed_links));
        for (auto scheme : schemes) {
            const auto s = run_cell(topo, scheme, flows, plan, seed);
            g[scheme].push_back(s);
            fmt::print(log, "{},{:.2f},{},{},{:.9g},{},{},{:.2f}\n", to_string(scheme), load, failed_links, seed,
                       s.mean_fct, s.done, s.failed, s.seconds);
            log.flush();
        }
    }
    return g;
}

void symmetric(const FatTree& topo, const SizeCdf& cdf, std::size_t flows, std::ostream& log) {
    const std::vector<SchemeKind> schemes{SchemeKind::optimal, SchemeKind::caft, SchemeKind::expeditus,
                                          SchemeKind::ecmp};
    std::map<double, Grid> grids;
    double slowest = 0;
    for (double load : {0.4, 0.6, 0.8}) {
        grids[load] = run_grid(topo, cdf, load, 0, schemes, flows, log);
        for (const auto& [s, v] : grids[load])
            for (const auto& r : v) slowest = std::max(slowest, r.seconds);
    }

    bool order_ok = true;
    std::string detail;
    for (auto& [load, g] : grids) {
        const double opt = mean_of(g[SchemeKind::optimal]), caft = mean_of(g[SchemeKind::caft]),
                     exp = mean_of(g[SchemeKind::expeditus]), ecmp = mean_of(g[SchemeKind::ecmp]);
        const bool ok = opt <= caft * 1.02 && caft <= exp * 1.02 && exp <= ecmp * 1.02;
        order_ok = order_ok && ok;
        detail += fmt::format(" load {:.1f}: opt {:.3f} caft {:.3f} exp {:.3f} ecmp {:.3f} ms{};", load, opt * 1e3,
                              caft * 1e3, exp * 1e3, ecmp * 1e3, ok ? "" : " (out of order)");
    }
    report(order_ok, "C1 symmetric ordering", "mean FCT Optimal <= CAFT <= Expeditus <= ECMP, 2% slack;" + detail);
    report(slowest < 60.0, "C1 runtime", fmt::format("slowest run {:.1f} s (limit 60 s)", slowest));

    // load with the largest CAFT advantage over ECMP
    double best_load = 0, best = 2;
    for (auto& [load, g] : grids) {
        const double r = paired_ratio(g[SchemeKind::caft], g[SchemeKind::ecmp]);
        if (r < best) best = r, best_load = load;
    }
    auto& g = grids[best_load];
    const double vs_ecmp = best;
    const double vs_exp = paired_ratio(g[SchemeKind::caft], g[SchemeKind::expeditus]);
    const double vs_opt = paired_ratio(g[SchemeKind::caft], g[SchemeKind::optimal]);
    report(vs_ecmp >= 0.60 && vs_ecmp <= 0.95, "C2 CAFT/ECMP",
           fmt::format("load {:.1f}: normalized mean FCT {:.4f} (want [0.60, 0.95])", best_load, vs_ecmp));
    report(vs_exp >= 0.85 && vs_exp <= 1.00, "C2 CAFT/Expeditus",
           fmt::format("load {:.1f}: {:.4f} (want [0.85, 1.00])", best_load, vs_exp));
    report(std::abs(vs_opt - 1.0) <= 0.05, "C2 CAFT/Optimal",
           fmt::format("load {:.1f}: {:.4f} (want within 5%)", best_load, vs_opt));
}

void asymmetric(const FatTree& topo, const SizeCdf& cdf, std::size_t flows, std::ostream& log) {
    constexpr double load = 0.6;
    std::vector<double> gaps;
    bool below = true;
    std::string detail;
    for (int failed : {2, 4, 6}) {
        auto g = run_grid(topo, cdf, load, failed, {SchemeKind::caft, SchemeKind::expeditus}, flows, log);
        const double caft = mean_of(g[SchemeKind::caft]), exp = mean_of(g[SchemeKind::expeditus]);
        below = below && caft <= exp;
        gaps.push_back(1.0 - caft / exp);
        detail += fmt::format(" {} failures: caft {:.3f} exp {:.3f} ms, reduction {:.2f}%;", failed, caft * 1e3,
                              exp * 1e3, gaps.back() * 100);
    }
    report(below, "C3 CAFT <= Expeditus", "load 0.6;" + detail);
    report(gaps[0] <= gaps[1] && gaps[1] <= gaps[2], "C3 gap nondecreasing",
           fmt::format("{:.2f}% {:.2f}% {:.2f}%", gaps[0] * 100, gaps[1] * 100, gaps[2] * 100));
    report(gaps[2] >= 0.10, "C3 reduction at 6 failures", fmt::format("{:.2f}% (want >= 10%)", gaps[2] * 100));
}

void oracle_equivalence() {
    std::mt19937_64 rng(20240601);
    std::size_t caft_cases = 0, caft_bad = 0, opt_cases = 0, opt_bad = 0;
    for (int k : {4, 8}) {
        const auto topo = FatTree::build(k, 1, 1e9);
        for (int trial = 0; trial < 10000; ++trial) {
            Fabric fabric(topo, FabricParams{{}, 4096, static_cast<std::uint64_t>(trial)});
            const auto m = LoadMap::random(topo, fabric, rng, trial % 3 == 0 ? 2 : 7);
            const auto [s, d] = random_pair(topo, rng);
            const auto flow = make_flow(topo, static_cast<std::uint64_t>(trial), s, d);
            CaftScheme caft;
            walk(caft, fabric, flow);
            const auto path = caft.data_path(fabric, flow);
            const auto want = caft_oracle(topo, m, s, d);
            ++caft_cases;
            if (!path || path->agg_index != want.agg || path->core_member != want.core) ++caft_bad;
        }
        for (int trial = 0; trial < 10000; ++trial) {
            Fabric fabric(topo, FabricParams{});
            if (trial % 2 == 0)
                for (const auto& l : FailurePlan::random(topo, 1 + trial % 6, rng()).links)
                    fabric.fail_link(l.pod, l.agg, l.member);
            const auto m = LoadMap::random(topo, fabric, rng, trial % 3 == 0 ? 2 : 7);
            const auto [s, d] = random_pair(topo, rng);
            const auto got = optimal_select(topo, fabric.snapshot(), s, d);
            const auto want = brute_force_optimal(topo, m, fabric, s, d);
            ++opt_cases;
            if (got.has_value() != want.has_value() ||
                (got && (got->agg_index != want->agg || got->core_member != want->core)))
                ++opt_bad;
        }
    }
    report(caft_bad == 0, "C4 CAFT exchange = two-candidate oracle",
           fmt::format("{} mismatches in {} snapshots (k=4, k=8)", caft_bad, caft_cases));
    report(opt_bad == 0, "C4 Optimal = exhaustive search",
           fmt::format("{} mismatches in {} snapshots (k=4, k=8)", opt_bad, opt_cases));
}

void failure_avoidance(const SizeCdf& cdf, std::size_t flows_per_run) {
    const auto topo = FatTree::build(8, 1, 1e9);
    const FailurePlan plan{{{0, 0, 0}}};
    const auto flows = generate(topo, WorkloadSpec{0.6, flows_per_run, cdf}, workload_seed(1, 0.6));
    const auto failed_up = topo.agg_up(0, 0, 0), failed_down = topo.core_down(0, 0, 0);
    auto uses_failed = [&](const std::optional<PathId>& p) {
        if (!p) return false;
        const auto links = topo.path_links(*p);
        return std::find(links.begin(), links.end(), failed_up) != links.end() ||
               std::find(links.begin(), links.end(), failed_down) != links.end();
    };

    // CAFT: first time a(p,0) learns that a(0,0) lost its core 0 uplink
    const auto caft = run(topo, SchemeKind::caft, flows, plan, EngineConfig{}, 1);
    std::map<int, SimTime> learned_at;
    learned_at[0] = SimTime{};  // a(0,0) knows its own link from the start
    for (const auto& l : caft.learned) {
        const auto info = topo.info(l.node);
        if (l.pod == 0 && l.port == 0 && info.index == 0 && !learned_at.count(info.pod)) learned_at[info.pod] = l.time;
    }
    std::size_t after = 0, violations = 0, before_hits = 0;
    for (const auto& pin : caft.pins) {
        const auto& f = caft.flows[pin.flow_id];
        const int sp = topo.pod_of_host(f.src_host), dp = topo.pod_of_host(f.dst_host);
        // the affected pair is a(sp,0)-a(0,0); the side away from pod 0 must have learned
        const int remote = sp == 0 ? dp : sp;
        const bool bad = pin.blackholed || uses_failed(pin.path);
        auto it = learned_at.find(remote);
        const bool pair_learned = sp == 0 ? true : it != learned_at.end() && pin.time >= it->second;
        if (pair_learned) {
            ++after;
            violations += bad;
        } else {
            before_hits += bad;
        }
    }
    report(violations == 0 && learned_at.size() == 8, "C5 CAFT avoids the failed link",
           fmt::format("{} of {} pins after learning use it; {} of 7 remote pods learned; {} hits before learning",
                       violations, after, learned_at.size() - 1, before_hits));

    // ECMP sends the SYN along the hashed data path, so a first attempt
    // hashed onto the dead core shows up as a drop there (or a blackholed pin).
    const auto ecmp = run(topo, SchemeKind::ecmp, flows, plan, EngineConfig{}, 1);
    std::vector<bool> first_hit(flows.size(), false);
    for (const auto& d : ecmp.drops)
        if (d.incarnation == 0 && (d.link == failed_down || d.link == failed_up)) first_hit[d.flow_id] = true;
    for (const auto& pin : ecmp.pins)
        if (pin.incarnation == 0 && pin.blackholed) first_hit[pin.flow_id] = true;
    std::size_t inbound = 0, hit = 0;
    for (const auto& f : flows) {
        if (topo.pod_of_host(f.dst_host) != 0) continue;
        ++inbound;
        hit += first_hit[f.id];
    }
    const double n = static_cast<double>(inbound), q = 1.0 / 16;
    const double sigma = std::sqrt(n * q * (1 - q));
    report(hit > 0 && std::abs(static_cast<double>(hit) - n * q) <= 3 * sigma, "C5 ECMP blackhole fraction",
           fmt::format("{} of {} inbound first attempts pinned through the failed link ({:.4f}, expected {:.4f} +- {:.4f})",
                       hit, inbound, hit / n, q, 3 * sigma / n));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void component_properties() {
    // wire tags
    {
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<int> noc(0, 127), nib(0, 15), coin(0, 1);
        std::size_t bad = 0;
        for (int i = 0; i < 100000; ++i) {
            PathTag t{coin(rng) ? kCaftTpid : kExpeditusTpid, coin(rng) ? TripFlag::inbound : TripFlag::outbound, {}};
            const int n = noc(rng);
            for (int j = 0; j < n; ++j) t.cm.push_back(CongestionEntry::from_nibble(static_cast<std::uint8_t>(nib(rng))));
            const auto b = encode(t);
            if (b.size() != (24 + 4 * t.cm.size() + 7) / 8 || !(decode(b, t.tpid) == t)) ++bad;
        }
        const PathTag hand{kCaftTpid, TripFlag::inbound, {{false, 4}, {true, 0}}};
        const bool vector_ok = encode(hand) == std::vector<std::uint8_t>{0x88, 0xB5, 0x82, 0x48} &&
                               decode(std::vector<std::uint8_t>{0x88, 0xB5, 0x82, 0x48}) == hand;
        report(bad == 0 && vector_ok, "C6 wire tags",
               fmt::format("{} mismatches in 100000 round trips; 88 B5 82 48 {}", bad, vector_ok ? "ok" : "wrong"));
    }
    // DRE steady state
    {
        std::size_t bad = 0, cases = 0;
        for (double alpha : {0.1, 0.25, 0.5})
            for (double cap : {1e9, 10e9})
                for (int step = 0; step <= 60; ++step) {
                    const double rate = cap * step / 48.0;
                    DreParams p;
                    p.alpha = alpha;
                    DreRegister reg(p, cap);
                    const int ticks = static_cast<int>(std::ceil(5 / alpha));
                    for (int i = 0; i < ticks; ++i) {
                        reg.tick();
                        reg.observe(rate * p.t_dre_s / 8);
                    }
                    const int want = std::min(7, static_cast<int>(std::floor(8 * rate / cap)));
                    ++cases;
                    if (std::abs(int(reg.quantize()) - want) > 1) ++bad;
                }
        report(bad == 0, "C6 DRE steady state", fmt::format("{} of {} rates off by more than one quantum", bad, cases));
    }
    // PAT idle expiry under the engine's 100 ms sweep
    {
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<std::int64_t> when(1, from_seconds(1.0).count());
        const SimTime period = from_seconds(0.1);
        double lo = 1e9, hi = 0;
        for (int i = 0; i < 10000; ++i) {
            PathAllocationTable pat(1024, 5);
            const FiveTuple f{1, 2, 3, 4, 6};
            const SimTime t0{when(rng)};
            pat.insert(f, 1, true);
            SimTime sweep = period * ((t0.count() / period.count()) + 1);
            for (;; sweep += period) {
                pat.sweep();
                const auto slot = pat.slot_for(f);
                if (!slot || !slot->valid) break;
            }
            const double idle_ms = to_seconds(sweep - t0) * 1e3;
            lo = std::min(lo, idle_ms);
            hi = std::max(hi, idle_ms);
        }
        report(lo > 100.0 && hi <= 200.0, "C6 PAT expiry",
               fmt::format("idle lifetimes in [{:.3f}, {:.3f}] ms over 10000 insert times", lo, hi));
    }
    // max-min vs water filling
    {
        std::mt19937_64 rng(99);
        std::size_t bad = 0;
        for (int i = 0; i < 1000; ++i) {
            const auto in = random_instance(rng);
            const auto got = solve(in.cap, in.flows);
            const auto want = water_fill(in.cap, in.flows);
            for (std::size_t f = 0; f < got.size(); ++f) bad += got[f] != floor_to_double(want[f]);
        }
        report(bad == 0, "C6 max-min", fmt::format("{} rates differ from exact water filling on 1000 instances", bad));
    }
    // determinism of the full pipeline
    {
        const auto base = fs::temp_directory_path() / "caft_acceptance_det";
        fs::remove_all(base);
        auto cfg = ExperimentConfig::load(fs::path(CAFT_SOURCE_DIR) / "configs" / "smoke.conf");
        cfg.output_dir = base / "a";
        const auto a = run_experiment(cfg);
        cfg.output_dir = base / "b";
        const auto b = run_experiment(cfg);
        std::size_t differ = 0;
        for (std::size_t i = 0; i < a.csvs.size(); ++i) differ += slurp(a.csvs[i]) != slurp(b.csvs[i]);
        differ += slurp(base / "a" / "summary.csv") != slurp(base / "b" / "summary.csv");
        report(differ == 0 && a.csvs.size() == b.csvs.size() && !a.csvs.empty(), "C6 determinism",
               fmt::format("{} of {} CSVs differ between repeated runs", differ, a.csvs.size() + 1));
        fs::remove_all(base);
    }
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t flows = 9000;
    if (argc > 1) flows = std::stoul(argv[1]);
    if (flows != 9000) fmt::print("note: {} flows per run instead of 9000\n", flows);

    const auto cdf = SizeCdf::load(fs::path(CAFT_SOURCE_DIR) / "data" / "websearch_cdf.txt");
    const auto topo = FatTree::build(8, 1, 1e9);
    std::ofstream log("acceptance_runs.csv");
    log << "scheme,load,failures,seed,mean_fct_s,done,failed,wall_s\n";

    component_properties();
    oracle_equivalence();
    failure_avoidance(cdf, flows);
    symmetric(topo, cdf, flows, log);
    asymmetric(topo, cdf, flows, log);

    fmt::print("{} criteria checks failed\n", failures_seen);
    return failures_seen == 0 ? 0 : 1;
}
