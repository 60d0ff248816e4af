#include "caft/engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <variant>

#include <fmt/format.h>

#include "caft/errors.hpp"
#include "caft/max_min.hpp"

namespace caft {

std::string_view to_string(FlowState s) {
    switch (s) {
        case FlowState::pending: return "pending";
        case FlowState::setup: return "setup";
        case FlowState::established: return "established";
        case FlowState::transferring: return "transferring";
        case FlowState::done: return "done";
        case FlowState::failed: return "failed";
    }
    return "?";
}

void EngineConfig::validate() const {
    if (!(dre.t_dre_s > 0)) throw ConfigError("t_dre must be positive");
    if (!(dre.alpha > 0 && dre.alpha <= 1)) throw ConfigError("alpha must be in (0,1]");
    if (per_hop_latency.count() <= 0) throw ConfigError("per-hop latency must be positive");
    if (pat_timeout.count() <= 0) throw ConfigError("PAT timeout must be positive");
    if (pat_size == 0) throw ConfigError("PAT size must be positive");
    if (retry_timeout.count() <= 0) throw ConfigError("retry timeout must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

FailurePlan FailurePlan::random(const FatTree& topo, int count, std::uint64_t seed) {
    std::vector<AggCoreLink> all;
    for (int p = 0; p < topo.pods(); ++p)
        for (int j = 0; j < topo.half(); ++j)
            for (int m = 0; m < topo.cores_per_group(); ++m) all.push_back({p, j, m});
    if (count < 0 || static_cast<std::size_t>(count) > all.size())
        throw ConfigError(fmt::format("cannot fail {} of {} agg-core links", count, all.size()));
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `count` entries are a uniform sample.
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), all.size() - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[pick(rng)]);
    }
    all.resize(static_cast<std::size_t>(count));
    return FailurePlan{std::move(all)};
}

FiveTuple flow_tuple(const FatTree& topo, const FlowSpec& flow) {
    return FiveTuple{topo.host_address(flow.src_host), topo.host_address(flow.dst_host),
                     static_cast<std::uint16_t>(1024 + flow.id % 64000), 80, 6};
}

namespace {

// Tie-break order at equal timestamps; metrics refresh before decisions.
enum class Priority : std::uint8_t {
    dre_tick = 0,
    control_hop = 1,
    flow_arrival = 2,
    flow_start = 3,
    flow_completion = 4,
    pat_sweep = 5,
    retry_timer = 6,
};

struct DreTick {};
struct PatSweep {};
struct ControlHop {
    ControlMessage msg;
    LinkId link;
};
struct FlowArrival {
    std::uint32_t flow;
};
struct FlowStart {
    std::uint32_t flow;
    std::uint32_t incarnation;
};
struct FlowCompletion {
    std::uint64_t version;
};
struct RetryTimer {
    std::uint32_t flow;
    std::uint32_t incarnation;
};

using Payload = std::variant<DreTick, PatSweep, ControlHop, FlowArrival, FlowStart, FlowCompletion, RetryTimer>;

struct Event {
    SimTime time;
    Priority priority;
    std::uint64_t seq;
    Payload payload;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.priority != b.priority) return a.priority > b.priority;
        return a.seq > b.seq;
    }
};

struct FlowRun {
    FlowRecord rec;
    std::uint32_t incarnation = 0;
    std::array<std::uint32_t, 6> links{};
    double rate_bps = 0.0;
    double remaining_bits = 0.0;
    double delivered_bits = 0.0;
    SimTime finish{};
    std::int64_t active_slot = -1;
};

}  // namespace

struct Simulator::Impl {
    Simulator& sim;
    const FatTree& topo;
    const EngineConfig& cfg;
    Fabric& fabric;
    Scheme& scheme;

    std::vector<Event> heap;
    std::uint64_t seq = 0;
    SimTime now{};
    SimTime last_advance{};
    std::uint64_t completion_version = 0;

    std::vector<FlowRun> flows;
    std::size_t open = 0;
    std::vector<std::uint32_t> active;
    std::vector<double> capacity;
    std::vector<double> link_rate;
    std::vector<std::pair<LinkId, DreRegister*>> monitored;
    RunResult result;

    Impl(Simulator& s)
        : sim(s), topo(s.topo_), cfg(s.config_), fabric(s.fabric_), scheme(*s.scheme_) {
        capacity.resize(topo.link_count());
        for (LinkId l = 0; l < topo.link_count(); ++l)
            capacity[l] = fabric.link_failed(l) ? 0.0 : topo.link(l).capacity_bps;
        link_rate.assign(topo.link_count(), 0.0);
        for (LinkId l = 0; l < topo.link_count(); ++l)
            if (auto* reg = fabric.monitor(l)) monitored.emplace_back(l, reg);
    }

    void schedule(SimTime t, Priority p, Payload payload) {
        heap.push_back(Event{t, p, seq++, std::move(payload)});
        std::push_heap(heap.begin(), heap.end(), Later{});
    }

    FlowView view(const FlowRun& f) const {
        return FlowView{f.rec.id, f.rec.tuple, f.rec.src_host, f.rec.dst_host, f.incarnation};
    }

    void finish_flow(FlowRun& f, FlowState state) {
        f.rec.state = state;
        --open;
    }

    void handle(Outcome out) {
        for (auto& e : out.emit) {
            if (fabric.link_failed(e.link)) {
                result.drops.push_back({e.msg.flow_id, e.msg.incarnation, now, e.msg.kind, e.link});
                continue;
            }
            schedule(now + cfg.per_hop_latency, Priority::control_hop, ControlHop{std::move(e.msg), e.link});
        }
        for (const auto& n : out.notices) {
            switch (n.kind) {
                case Notice::Kind::syn_delivered: {
                    auto& f = flows[static_cast<std::size_t>(n.flow_id)];
                    if (f.rec.state == FlowState::setup && f.incarnation == n.incarnation) {
                        f.rec.state = FlowState::established;
                        // The SYN-ACK returns over as many hops as the SYN took.
                        schedule(now + 4 * cfg.per_hop_latency, Priority::flow_start,
                                 FlowStart{static_cast<std::uint32_t>(n.flow_id), n.incarnation});
                    }
                    break;
                }
                case Notice::Kind::failure_learned:
                    result.learned.push_back({now, n.node, n.pod, n.port});
                    break;
                case Notice::Kind::path_decided:
                case Notice::Kind::setup_void:
                case Notice::Kind::no_uplink:
                    break;
            }
        }
    }

    void start_attempt(FlowRun& f) {
        f.rec.state = FlowState::setup;
        handle(scheme.on_new_flow(fabric, view(f)));
        schedule(now + cfg.retry_timeout, Priority::retry_timer,
                 RetryTimer{static_cast<std::uint32_t>(f.rec.id), f.incarnation});
    }

    // Moves every transferring flow forward to `now` at its current rate.
    void advance() {
        const double dt = to_seconds(now - last_advance);
        if (dt > 0)
            for (auto idx : active) {
                auto& f = flows[idx];
                const double bits = f.rate_bps * dt;
                f.remaining_bits -= bits;
                f.delivered_bits += bits;
            }
        last_advance = now;
    }

    void recompute() {
        ++result.rate_recomputations;
        for (auto idx : active)
            for (auto l : flows[idx].links) link_rate[l] = 0.0;

        std::vector<std::span<const std::uint32_t>> paths;
        paths.reserve(active.size());
        for (auto idx : active) paths.emplace_back(flows[idx].links);
        const auto rates = max_min_rates(capacity, paths);

        SimTime next = SimTime::max();
        for (std::size_t i = 0; i < active.size(); ++i) {
            auto& f = flows[active[i]];
            f.rate_bps = rates[i];
            for (auto l : f.links) link_rate[l] += rates[i];
            if (f.rate_bps > 0) {
                const double ticks = std::max(0.0, f.remaining_bits) / f.rate_bps * 1e15;
                f.finish = now + SimTime{static_cast<std::int64_t>(std::ceil(ticks))};
            } else {
                f.finish = SimTime::max();
            }
            next = std::min(next, f.finish);
        }
        result.max_link_excess_bps = std::max(result.max_link_excess_bps, max_link_excess(capacity, paths, rates));

        ++completion_version;
        if (next != SimTime::max()) schedule(next, Priority::flow_completion, FlowCompletion{completion_version});
    }

    void add_active(FlowRun& f) {
        f.active_slot = static_cast<std::int64_t>(active.size());
        active.push_back(static_cast<std::uint32_t>(f.rec.id));
    }

    void remove_active(FlowRun& f) {
        const auto slot = static_cast<std::size_t>(f.active_slot);
        const auto last = active.back();
        active[slot] = last;
        flows[last].active_slot = static_cast<std::int64_t>(slot);
        active.pop_back();
        f.active_slot = -1;
        for (auto l : f.links) link_rate[l] = 0.0;
    }

    void on(const DreTick&) {
        const double t = cfg.dre.t_dre_s;
        for (auto& [link, reg] : monitored) {
            reg->tick();
            reg->observe(link_rate[link] * t / 8.0);
        }
        if (open > 0) schedule(now + from_seconds(t), Priority::dre_tick, DreTick{});
    }

    void on(const PatSweep&) {
        // Transferring flows keep sending, which refreshes their entries.
        for (auto idx : active) {
            const auto& f = flows[idx];
            if (!f.rec.path) continue;
            const int sp = topo.pod_of_host(f.rec.src_host);
            fabric.tor_state(sp, topo.tor_index_of_host(f.rec.src_host)).pat.lookup(f.rec.tuple);
            fabric.agg_state(sp, f.rec.path->agg_index).pat.lookup(f.rec.tuple);
        }
        for (int p = 0; p < topo.pods(); ++p)
            for (int i = 0; i < topo.half(); ++i) {
                fabric.tor_state(p, i).pat.sweep();
                fabric.agg_state(p, i).pat.sweep();
            }
        if (open > 0) schedule(now + cfg.pat_timeout, Priority::pat_sweep, PatSweep{});
    }

    void on(ControlHop& hop) {
        const NodeId at = topo.link(hop.link).dst;
        handle(scheme.on_message(fabric, at, hop.link, std::move(hop.msg)));
    }

    void on(const FlowArrival& a) { start_attempt(flows[a.flow]); }

    void on(const FlowStart& s) {
        auto& f = flows[s.flow];
        if (f.incarnation != s.incarnation || f.rec.state != FlowState::established) return;
        const auto path = scheme.data_path(fabric, view(f));
        bool blackholed = !path;
        if (path) {
            const auto links = topo.path_links(*path);
            blackholed = std::any_of(links.begin(), links.end(), [&](LinkId l) { return fabric.link_failed(l); });
        }
        result.pins.push_back({f.rec.id, f.incarnation, now, path, blackholed});
        if (blackholed) {
            // Data vanishes; the pending retry timer of this attempt fires.
            f.rec.state = FlowState::setup;
            return;
        }
        advance();
        f.rec.state = FlowState::transferring;
        f.rec.start = now;
        f.rec.path = path;
        const auto links = topo.path_links(*path);
        std::copy(links.begin(), links.end(), f.links.begin());
        f.remaining_bits = static_cast<double>(f.rec.size_bytes) * 8.0;
        f.delivered_bits = 0.0;
        add_active(f);
        recompute();
    }

    void on(const FlowCompletion& c) {
        if (c.version != completion_version) return;
        advance();
        bool any = false;
        for (std::size_t i = 0; i < active.size();) {
            auto& f = flows[active[i]];
            if (f.finish <= now) {
                const double size_bits = static_cast<double>(f.rec.size_bytes) * 8.0;
                result.max_conservation_error =
                    std::max(result.max_conservation_error, std::abs(f.delivered_bits - size_bits) / size_bits);
                f.rec.completion = now;
                remove_active(f);
                finish_flow(f, FlowState::done);
                any = true;
            } else {
                ++i;
            }
        }
        if (any) recompute();
    }

    void on(const RetryTimer& r) {
        auto& f = flows[r.flow];
        if (f.incarnation != r.incarnation || f.rec.state != FlowState::setup) return;
        if (f.rec.retries >= cfg.max_retries) {
            finish_flow(f, FlowState::failed);
            return;
        }
        ++f.rec.retries;
        ++f.incarnation;
        start_attempt(f);
    }

    RunResult run(std::span<const FlowSpec> specs) {
        flows.resize(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const auto& s = specs[i];
            if (s.id != i) throw ConfigError("flow ids must be dense and in arrival order");
            if (i > 0 && s.arrival < specs[i - 1].arrival) throw ConfigError("flows must be sorted by arrival");
            if (s.size_bytes == 0) throw ConfigError(fmt::format("flow {} has zero size", s.id));
            if (topo.pod_of_host(s.src_host) == topo.pod_of_host(s.dst_host))
                throw UnsupportedTraffic(fmt::format("flow {} is intra-pod", s.id));
            auto& f = flows[i];
            f.rec.id = s.id;
            f.rec.tuple = flow_tuple(topo, s);
            f.rec.src_host = s.src_host;
            f.rec.dst_host = s.dst_host;
            f.rec.size_bytes = s.size_bytes;
            f.rec.arrival = s.arrival;
            schedule(s.arrival, Priority::flow_arrival, FlowArrival{static_cast<std::uint32_t>(i)});
        }
        open = flows.size();
        if (open > 0) {
            schedule(from_seconds(cfg.dre.t_dre_s), Priority::dre_tick, DreTick{});
            schedule(cfg.pat_timeout, Priority::pat_sweep, PatSweep{});
        }

        while (!heap.empty()) {
            std::pop_heap(heap.begin(), heap.end(), Later{});
            Event ev = std::move(heap.back());
            heap.pop_back();
            now = ev.time;
            ++result.events;
            std::visit([this](auto& p) { on(p); }, ev.payload);
            if (open == 0) break;
        }

        result.end_time = now;
        result.flows.reserve(flows.size());
        for (auto& f : flows) result.flows.push_back(std::move(f.rec));
        return std::move(result);
    }
};

Simulator::Simulator(const FatTree& topo, SchemeKind scheme, EngineConfig config, std::uint64_t seed)
    : topo_(topo),
      config_(config),
      seed_(seed),
      fabric_(topo, FabricParams{config.dre, config.pat_size, seed}),
      scheme_(make_scheme(scheme)) {
    config_.validate();
}

Simulator::~Simulator() = default;

void Simulator::apply(const FailurePlan& plan) {
    for (const auto& l : plan.links) fabric_.fail_link(l.pod, l.agg, l.member);
}

RunResult Simulator::run(std::span<const FlowSpec> flows) {
    Impl impl(*this);
    return impl.run(flows);
}

RunResult run(const FatTree& topo, SchemeKind scheme, std::span<const FlowSpec> flows, const FailurePlan& failures,
              const EngineConfig& config, std::uint64_t seed) {
    Simulator sim(topo, scheme, config, seed);
    sim.apply(failures);
    return sim.run(flows);
}

}  // namespace caft
