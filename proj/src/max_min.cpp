#include "caft/max_min.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/multiprecision/gmp.hpp>

namespace caft {

namespace {

using Rational = boost::multiprecision::mpq_rational;

constexpr double kInf = std::numeric_limits<double>::infinity();

double ulp(double x) {
    x = std::abs(x);
    return std::nextafter(x, kInf) - x;
}

struct HeapEntry {
    double key;
    std::uint32_t link;
    std::uint32_t version;
    bool operator>(const HeapEntry& o) const { return key > o.key || (key == o.key && link > o.link); }
};

// Scratch storage reused across calls; GMP numbers keep their limbs.
struct Workspace {
    std::vector<std::int32_t> slot;
    std::vector<std::uint32_t> used;
    std::vector<double> approx;
    std::vector<double> slack;
    std::vector<std::uint32_t> unfrozen;
    std::vector<std::uint32_t> version;
    std::vector<std::uint32_t> on_begin;
    std::vector<std::uint32_t> on_flows;
    std::vector<Rational> remaining;
    std::vector<char> exact_ready;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> owed;
    std::vector<Rational> levels;
    std::vector<HeapEntry> heap;
    std::vector<char> frozen;
    std::vector<std::uint32_t> candidates;
    std::vector<std::uint32_t> bottlenecks;
    std::vector<std::uint32_t> touched;
    Rational share, level, scratch;
};

// Largest double not above q.
double round_down(const Rational& q, Rational& scratch) {
    double d = q.convert_to<double>();
    scratch = d;
    while (scratch > q) {
        d = std::nextafter(d, -kInf);
        scratch = d;
    }
    for (;;) {
        const double up = std::nextafter(d, kInf);
        scratch = up;
        if (scratch > q) break;
        d = up;
    }
    return d;
}

}  // namespace

std::vector<double> max_min_rates(std::span<const double> link_capacity,
                                  std::span<const std::span<const std::uint32_t>> flow_links) {
    const std::size_t nflows = flow_links.size();
    std::vector<double> rate(nflows, 0.0);
    if (nflows == 0) return rate;

    thread_local Workspace ws;

    // Compact the links actually in use.
    ws.slot.assign(link_capacity.size(), -1);
    ws.used.clear();
    for (const auto& links : flow_links) {
        if (links.empty()) throw std::invalid_argument("flow traverses no links");
        for (auto l : links) {
            if (l >= link_capacity.size()) throw std::out_of_range("flow references unknown link");
            if (ws.slot[l] < 0) {
                ws.slot[l] = static_cast<std::int32_t>(ws.used.size());
                ws.used.push_back(l);
            }
        }
    }
    const std::size_t nused = ws.used.size();
    for (auto l : ws.used)
        if (!(link_capacity[l] >= 0) || !std::isfinite(link_capacity[l]))
            throw std::invalid_argument("link capacity must be finite and nonnegative");

    // Remaining capacity is exact but only materialized for links that
    // become candidates; `approx` tracks it in doubles with a running bound
    // `slack` on |approx - exact| and narrows the search for the bottleneck.
    ws.approx.resize(nused);
    ws.slack.assign(nused, 0.0);
    ws.unfrozen.assign(nused, 0);
    ws.version.assign(nused, 0);
    ws.exact_ready.assign(nused, 0);
    if (ws.remaining.size() < nused) ws.remaining.resize(nused);
    if (ws.owed.size() < nused) ws.owed.resize(nused);
    for (std::size_t i = 0; i < nused; ++i) {
        ws.approx[i] = link_capacity[ws.used[i]];
        ws.owed[i].clear();
    }

    // Flows of each link, CSR layout.
    for (const auto& links : flow_links)
        for (auto l : links) ++ws.unfrozen[static_cast<std::size_t>(ws.slot[l])];
    ws.on_begin.assign(nused + 1, 0);
    for (std::size_t i = 0; i < nused; ++i) ws.on_begin[i + 1] = ws.on_begin[i] + ws.unfrozen[i];
    ws.on_flows.resize(ws.on_begin[nused]);
    ws.touched.assign(ws.on_begin.begin(), ws.on_begin.end() - 1);
    for (std::size_t f = 0; f < nflows; ++f)
        for (auto l : flow_links[f]) ws.on_flows[ws.touched[static_cast<std::size_t>(ws.slot[l])]++] = static_cast<std::uint32_t>(f);

    // Exact subtractions are deferred: each link keeps (round, flows frozen
    // that round) pairs and settles them when it becomes a candidate.
    std::size_t rounds = 0;
    auto settle = [&](std::size_t i) {
        if (!ws.exact_ready[i]) {
            ws.remaining[i] = link_capacity[ws.used[i]];
            ws.exact_ready[i] = 1;
        }
        for (auto [round, count] : ws.owed[i]) {
            ws.scratch = ws.levels[round];
            ws.scratch *= count;
            ws.remaining[i] -= ws.scratch;
        }
        ws.owed[i].clear();
    };

    auto lower = [&](std::size_t i) { return (ws.approx[i] - ws.slack[i]) / ws.unfrozen[i] * (1.0 - 1e-12); };
    auto upper = [&](std::size_t i) { return (ws.approx[i] + ws.slack[i]) / ws.unfrozen[i] * (1.0 + 1e-12); };

    // Levels never decrease while filling, so a lazy min-heap on the lower
    // bound finds every link that can hold the minimum level. Stale entries
    // are recognized by their version.
    auto& heap = ws.heap;
    heap.clear();
    for (std::size_t i = 0; i < nused; ++i) heap.push_back({lower(i), static_cast<std::uint32_t>(i), 0});
    std::make_heap(heap.begin(), heap.end(), std::greater<>{});
    auto fresh = [&](const HeapEntry& e) { return ws.unfrozen[e.link] > 0 && ws.version[e.link] == e.version; };

    ws.frozen.assign(nflows, 0);
    std::size_t left = nflows;
    while (left > 0) {
        ws.candidates.clear();
        double bound = kInf;
        while (!heap.empty()) {
            const HeapEntry e = heap.front();
            if (!fresh(e)) {
                std::pop_heap(heap.begin(), heap.end(), std::greater<>{});
                heap.pop_back();
                continue;
            }
            if (e.key > bound) break;
            std::pop_heap(heap.begin(), heap.end(), std::greater<>{});
            heap.pop_back();
            ws.candidates.push_back(e.link);
            bound = std::min(bound, upper(e.link));
        }

        ws.bottlenecks.clear();
        for (auto i : ws.candidates) {
            settle(i);
            ws.level = ws.remaining[i];
            ws.level /= ws.unfrozen[i];
            if (ws.bottlenecks.empty() || ws.level < ws.share) {
                ws.share = ws.level;
                ws.bottlenecks.assign(1, i);
            } else if (ws.level == ws.share) {
                ws.bottlenecks.push_back(i);
            }
        }

        const double share_d = round_down(ws.share, ws.scratch);
        const auto round = static_cast<std::uint32_t>(rounds++);
        if (ws.levels.size() < rounds) ws.levels.resize(rounds);
        ws.levels[round] = ws.share;
        ws.touched.clear();
        for (auto i : ws.bottlenecks) {
            for (auto k = ws.on_begin[i]; k < ws.on_begin[i + 1]; ++k) {
                const auto f = ws.on_flows[k];
                if (ws.frozen[f]) continue;
                ws.frozen[f] = 1;
                rate[f] = share_d;
                --left;
                for (auto l : flow_links[f]) {
                    const auto s = static_cast<std::size_t>(ws.slot[l]);
                    auto& owed = ws.owed[s];
                    if (owed.empty() || owed.back().first != round)
                        owed.emplace_back(round, 1);
                    else
                        ++owed.back().second;
                    --ws.unfrozen[s];
                    ws.touched.push_back(static_cast<std::uint32_t>(s));
                    if (ws.unfrozen[s] == 0) continue;
                    // share_d is within one ulp below the exact share; the
                    // subtraction rounds by at most one ulp of the result.
                    ws.approx[s] -= share_d;
                    ws.slack[s] += ulp(share_d) + ulp(ws.approx[s]);
                }
            }
        }
        // Popped candidates and links that lost flows go back with new keys.
        ws.touched.insert(ws.touched.end(), ws.candidates.begin(), ws.candidates.end());
        std::sort(ws.touched.begin(), ws.touched.end());
        ws.touched.erase(std::unique(ws.touched.begin(), ws.touched.end()), ws.touched.end());
        for (auto i : ws.touched)
            if (ws.unfrozen[i] > 0) {
                heap.push_back({lower(i), i, ++ws.version[i]});
                std::push_heap(heap.begin(), heap.end(), std::greater<>{});
            }
    }
    return rate;
}

namespace {

// Doubles in [2^-22, 2^52) are whole multiples of 2^-74, so sums of them are
// exact in 128-bit fixed point.
constexpr int kFixedShift = 74;

bool to_fixed(double x, __int128& out) {
    if (x == 0.0) {
        out = 0;
        return true;
    }
    if (!(x >= 0x1p-22 && x < 0x1p52)) return false;
    out = static_cast<__int128>(std::ldexp(x, kFixedShift));
    return true;
}

}  // namespace

double max_link_excess(std::span<const double> link_capacity,
                       std::span<const std::span<const std::uint32_t>> flow_links, std::span<const double> rates) {
    if (rates.size() != flow_links.size()) throw std::invalid_argument("one rate per flow expected");
    thread_local std::vector<__int128> sum;
    thread_local std::vector<char> used, fixed_ok;
    sum.assign(link_capacity.size(), 0);
    used.assign(link_capacity.size(), 0);
    fixed_ok.assign(link_capacity.size(), 1);
    for (std::size_t f = 0; f < flow_links.size(); ++f) {
        __int128 v = 0;
        const bool ok = to_fixed(rates[f], v);
        for (auto l : flow_links[f]) {
            if (l >= link_capacity.size()) throw std::out_of_range("flow references unknown link");
            used[l] = 1;
            if (ok)
                sum[l] += v;
            else
                fixed_ok[l] = 0;
        }
    }

    double worst = -kInf;
    bool slow = false;
    for (std::size_t l = 0; l < link_capacity.size(); ++l) {
        if (!used[l]) continue;
        __int128 cap = 0;
        if (!fixed_ok[l] || !to_fixed(link_capacity[l], cap)) {
            fixed_ok[l] = 0;
            slow = true;
            continue;
        }
        worst = std::max(worst, std::ldexp(static_cast<double>(sum[l] - cap), -kFixedShift));
    }
    if (!slow) return worst;

    // Rates or capacities outside the fixed-point range: exact rationals.
    std::vector<Rational> exact(link_capacity.size());
    for (std::size_t f = 0; f < flow_links.size(); ++f)
        for (auto l : flow_links[f])
            if (!fixed_ok[l]) exact[l] += Rational(rates[f]);
    for (std::size_t l = 0; l < link_capacity.size(); ++l) {
        if (!used[l] || fixed_ok[l]) continue;
        exact[l] -= Rational(link_capacity[l]);
        worst = std::max(worst, exact[l].convert_to<double>());
    }
    return worst;
}

}  // namespace caft
