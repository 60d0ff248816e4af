#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "caft/baselines.hpp"
#include "caft/caft_protocol.hpp"
#include "caft/engine.hpp"
#include "caft/fabric.hpp"
#include "caft/topology.hpp"

namespace caft::testing {

// Register content whose 3-bit code is `load`: middle of the bin.
inline double bytes_for_load(const DreRegister& reg, int load) {
    const double util = (load + 0.5) / 8.0;
    return util * reg.params().t_dre_s * reg.capacity() / (8.0 * reg.params().alpha);
}

/// Ground-truth load per LinkId (-1 on unmonitored links) written into every
/// DRE register of the fabric.
struct LoadMap {
    std::vector<int> load;

    static LoadMap random(const FatTree& topo, Fabric& fabric, std::mt19937_64& rng, int max_load = 7) {
        LoadMap m;
        m.load.assign(topo.link_count(), -1);
        std::uniform_int_distribution<int> pick(0, max_load);
        for (LinkId l = 0; l < topo.link_count(); ++l)
            if (auto* reg = fabric.monitor(l)) {
                m.load[l] = pick(rng);
                reg->set_bytes(bytes_for_load(*reg, m.load[l]));
            }
        return m;
    }

    int operator[](LinkId l) const { return load[l]; }
};

/// Every control message of one connection attempt carried to completion
/// without timing. Emissions onto failed links are dropped.
struct Hop {
    MessageKind kind;
    LinkId link;
    std::size_t noc;
};

struct Walk {
    std::vector<Hop> hops;
    std::vector<Emission> drops;
    std::vector<Notice> notices;

    std::size_t emitted(MessageKind kind) const {
        std::size_t n = 0;
        for (const auto& h : hops) n += h.kind == kind;
        for (const auto& d : drops) n += d.msg.kind == kind;
        return n;
    }
    std::optional<Notice> notice(Notice::Kind kind) const {
        for (const auto& n : notices)
            if (n.kind == kind) return n;
        return std::nullopt;
    }
};

inline std::size_t tag_noc(const ControlMessage& msg) {
    if (msg.tag.empty()) return 0;
    return decode(msg.tag, msg.kind == MessageKind::exp_request || msg.kind == MessageKind::exp_response
                               ? kExpeditusTpid
                               : kCaftTpid)
        .cm.size();
}

inline Walk walk(Scheme& scheme, Fabric& fabric, const FlowView& flow) {
    const auto& topo = fabric.topo();
    Walk w;
    std::deque<Emission> queue;
    auto take = [&](Outcome out) {
        for (auto& e : out.emit) {
            if (fabric.link_failed(e.link))
                w.drops.push_back(std::move(e));
            else
                queue.push_back(std::move(e));
        }
        w.notices.insert(w.notices.end(), out.notices.begin(), out.notices.end());
    };
    take(scheme.on_new_flow(fabric, flow));
    while (!queue.empty()) {
        Emission e = std::move(queue.front());
        queue.pop_front();
        w.hops.push_back({e.msg.kind, e.link, tag_noc(e.msg)});
        take(scheme.on_message(fabric, topo.link(e.link).dst, e.link, std::move(e.msg)));
    }
    return w;
}

inline FlowView make_flow(const FatTree& topo, std::uint64_t id, HostId src, HostId dst, std::uint32_t inc = 0) {
    const FlowSpec spec{id, SimTime{}, src, dst, 1000};
    return FlowView{id, flow_tuple(topo, spec), src, dst, inc};
}

inline std::pair<HostId, HostId> random_pair(const FatTree& topo, std::mt19937_64& rng) {
    std::uniform_int_distribution<HostId> pick(0, static_cast<HostId>(topo.host_count() - 1));
    for (;;) {
        const HostId s = pick(rng), d = pick(rng);
        if (topo.pod_of_host(s) != topo.pod_of_host(d)) return {s, d};
    }
}

// ---- oracles on a LoadMap, written from the link accessors only ------------

struct Choice {
    int agg;
    int core;
    int worst;
};

inline int argmin_core(const FatTree& topo, const LoadMap& m, int sp, int dp, int j) {
    int best = -1, best_v = 99;
    for (int c = 0; c < topo.cores_per_group(); ++c) {
        const int v = std::max(m[topo.agg_up(sp, j, c)], m[topo.core_down(j, c, dp)]);
        if (v < best_v) best = c, best_v = v;
    }
    return best;
}

inline int path_worst(const FatTree& topo, const LoadMap& m, HostId s, HostId d, int j, int c) {
    const int sp = topo.pod_of_host(s), dp = topo.pod_of_host(d);
    const int si = topo.tor_index_of_host(s), di = topo.tor_index_of_host(d);
    return std::max({m[topo.tor_up(sp, si, j)], m[topo.agg_up(sp, j, c)], m[topo.core_down(j, c, dp)],
                     m[topo.agg_down(dp, j, di)]});
}

/// Two candidates: the least loaded first hop with its best core, and the
/// best other aggregation index by (ToR egress, ToR ingress) with its best core.
inline Choice caft_oracle(const FatTree& topo, const LoadMap& m, HostId s, HostId d) {
    const int sp = topo.pod_of_host(s), dp = topo.pod_of_host(d);
    const int si = topo.tor_index_of_host(s), di = topo.tor_index_of_host(d);
    const int half = topo.half();

    int u = 0;
    for (int j = 1; j < half; ++j)
        if (m[topo.tor_up(sp, si, j)] < m[topo.tor_up(sp, si, u)]) u = j;
    int v = -1, v_val = 99;
    for (int j = 0; j < half; ++j) {
        if (j == u) continue;
        const int x = std::max(m[topo.tor_up(sp, si, j)], m[topo.agg_down(dp, j, di)]);
        if (x < v_val) v = j, v_val = x;
    }
    const int cu = argmin_core(topo, m, sp, dp, u);
    const Choice first{u, cu, path_worst(topo, m, s, d, u, cu)};
    if (v < 0) return first;
    const int cv = argmin_core(topo, m, sp, dp, v);
    const Choice second{v, cv, path_worst(topo, m, s, d, v, cv)};
    return second.worst < first.worst ? second : first;
}

/// Aggregation by (ToR egress, ToR ingress) min-max, then the core.
inline Choice expeditus_oracle(const FatTree& topo, const LoadMap& m, HostId s, HostId d) {
    const int sp = topo.pod_of_host(s), dp = topo.pod_of_host(d);
    const int si = topo.tor_index_of_host(s), di = topo.tor_index_of_host(d);
    int j_best = 0, j_val = 99;
    for (int j = 0; j < topo.half(); ++j) {
        const int x = std::max(m[topo.tor_up(sp, si, j)], m[topo.agg_down(dp, j, di)]);
        if (x < j_val) j_best = j, j_val = x;
    }
    const int c = argmin_core(topo, m, sp, dp, j_best);
    return {j_best, c, path_worst(topo, m, s, d, j_best, c)};
}

/// Exhaustive search over every (agg, core) with failed links excluded.
inline std::optional<Choice> brute_force_optimal(const FatTree& topo, const LoadMap& m, const Fabric& fabric,
                                                 HostId s, HostId d) {
    const int sp = topo.pod_of_host(s), dp = topo.pod_of_host(d);
    std::optional<Choice> best;
    for (int j = 0; j < topo.half(); ++j)
        for (int c = 0; c < topo.cores_per_group(); ++c) {
            if (fabric.link_failed(topo.agg_up(sp, j, c)) || fabric.link_failed(topo.core_down(j, c, dp))) continue;
            const int w = path_worst(topo, m, s, d, j, c);
            if (!best || w < best->worst) best = Choice{j, c, w};
        }
    return best;
}

}  // namespace caft::testing
