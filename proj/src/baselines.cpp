#include "caft/baselines.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "caft/caft_protocol.hpp"
#include "caft/errors.hpp"
#include "caft/wire_tags.hpp"

namespace caft {

std::string_view to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::caft: return "caft";
        case SchemeKind::expeditus: return "expeditus";
        case SchemeKind::ecmp: return "ecmp";
        case SchemeKind::optimal: return "optimal";
    }
    return "?";
}

SchemeKind scheme_from_string(std::string_view name) {
    for (auto k : {SchemeKind::caft, SchemeKind::expeditus, SchemeKind::ecmp, SchemeKind::optimal})
        if (to_string(k) == name) return k;
    throw ConfigError(fmt::format("unknown scheme '{}' (expected caft, expeditus, ecmp or optimal)", name));
}

std::unique_ptr<Scheme> make_scheme(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::caft: return std::make_unique<CaftScheme>();
        case SchemeKind::expeditus: return std::make_unique<ExpeditusScheme>();
        case SchemeKind::ecmp: return std::make_unique<EcmpScheme>();
        case SchemeKind::optimal: return std::make_unique<OptimalScheme>();
    }
    throw ConfigError("unknown scheme");
}

Emission Scheme::forward_down(const Fabric& fabric, NodeId at, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    const HostId dst = topo.host_from_address(msg.header.dst_ip);
    if (self.kind == NodeKind::core) {
        const LinkId l = topo.core_down(self.index, self.member, topo.pod_of_host(dst));
        return {std::move(msg), l};
    }
    if (self.kind == NodeKind::agg) {
        const LinkId l = topo.agg_down(self.pod, self.index, topo.tor_index_of_host(dst));
        return {std::move(msg), l};
    }
    throw std::logic_error("forward_down called at a ToR or host");
}

int ecmp_select(const FiveTuple& tuple, std::span<const int> viable, std::uint64_t salt) {
    if (viable.empty()) throw std::invalid_argument("ECMP over an empty port set");
    return viable[static_cast<std::size_t>(flow_hash(tuple, salt) % viable.size())];
}

namespace {

Notice make_notice(Notice::Kind kind, const ControlMessage& msg, NodeId node, int pod = -1, int port = -1) {
    return Notice{kind, msg.flow_id, msg.incarnation, node, pod, port};
}

// Source-side uplink choice shared by the baselines: PAT hit first, else hash.
std::optional<PathId> hashed_data_path(Fabric& fabric, const FlowView& flow, bool use_pat) {
    const auto& topo = fabric.topo();
    const int sp = topo.pod_of_host(flow.src_host), dp = topo.pod_of_host(flow.dst_host);
    const int ti = topo.tor_index_of_host(flow.src_host);

    std::optional<int> up;
    if (use_pat) up = fabric.tor_state(sp, ti).pat.lookup(flow.tuple);
    if (!up) {
        const auto viable = fabric.tor_viable_uplinks(sp, ti);
        if (viable.empty()) return std::nullopt;
        up = fabric.ecmp(topo.tor(sp, ti), flow.tuple, flow.incarnation, viable);
    }
    std::optional<int> member;
    if (use_pat) member = fabric.agg_state(sp, *up).pat.lookup(flow.tuple);
    if (!member) {
        const auto viable = fabric.agg_viable_uplinks(sp, *up, dp, false);
        if (viable.empty()) return std::nullopt;
        member = fabric.ecmp(topo.agg(sp, *up), flow.tuple, flow.incarnation, viable);
    }
    return PathId{flow.src_host, flow.dst_host, *up, *member};
}

ControlMessage new_message(MessageKind kind, const FlowView& flow) {
    ControlMessage msg;
    msg.kind = kind;
    msg.header = flow.tuple;
    msg.flow_id = flow.id;
    msg.incarnation = flow.incarnation;
    return msg;
}

// Plain hashed uplink forwarding at the source ToR / source aggregation.
Outcome hash_up(Fabric& fabric, NodeId at, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    Outcome out;
    if (self.kind == NodeKind::tor) {
        const auto viable = fabric.tor_viable_uplinks(self.pod, self.index);
        if (viable.empty()) {
            out.notices.push_back(make_notice(Notice::Kind::no_uplink, msg, at));
            return out;
        }
        const int j = fabric.ecmp(at, msg.header, msg.incarnation, viable);
        out.emit.push_back({std::move(msg), topo.tor_up(self.pod, self.index, j)});
        return out;
    }
    const int remote = topo.pod_of_host(topo.host_from_address(msg.header.dst_ip));
    const auto viable = fabric.agg_viable_uplinks(self.pod, self.index, remote, false);
    if (viable.empty()) {
        out.notices.push_back(make_notice(Notice::Kind::no_uplink, msg, at));
        return out;
    }
    const int m = fabric.ecmp(at, msg.header, msg.incarnation, viable);
    out.emit.push_back({std::move(msg), topo.agg_up(self.pod, self.index, m)});
    return out;
}

// Expeditus carries no failure bit: a dead local link reads as saturated.
std::vector<CongestionEntry> without_failure_bits(std::vector<CongestionEntry> v) {
    for (auto& e : v)
        if (e.failed) e = CongestionEntry{false, 7};
    return v;
}

[[noreturn]] void no_handler(std::string_view scheme, const ControlMessage& msg, NodeId at, LinkId via) {
    throw std::logic_error(fmt::format("{}: no handler for {} at node {} via link {}", scheme, to_string(msg.kind), at, via));
}

}  // namespace

// ---- ECMP ------------------------------------------------------------------

Outcome EcmpScheme::on_new_flow(Fabric& fabric, const FlowView& flow) {
    const auto& topo = fabric.topo();
    return hash_up(fabric, topo.tor_of_host(flow.src_host), new_message(MessageKind::syn, flow));
}

Outcome EcmpScheme::on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    const LinkKind arrived = topo.link(via).kind;
    if (self.kind == NodeKind::core || (self.kind == NodeKind::agg && arrived == LinkKind::core_down))
        return Outcome{{forward_down(fabric, at, std::move(msg))}, {}};
    if (self.kind == NodeKind::agg && arrived == LinkKind::tor_up) return hash_up(fabric, at, std::move(msg));
    if (self.kind == NodeKind::tor && arrived == LinkKind::agg_down)
        return Outcome{{}, {make_notice(Notice::Kind::syn_delivered, msg, at)}};
    no_handler("ecmp", msg, at, via);
}

std::optional<PathId> EcmpScheme::data_path(Fabric& fabric, const FlowView& flow) {
    return hashed_data_path(fabric, flow, false);
}

// ---- Expeditus -------------------------------------------------------------

Outcome ExpeditusScheme::on_new_flow(Fabric& fabric, const FlowView& flow) {
    const auto& topo = fabric.topo();
    const int pod = topo.pod_of_host(flow.src_host), idx = topo.tor_index_of_host(flow.src_host);
    ControlMessage msg = new_message(MessageKind::exp_request, flow);
    const auto egress = fabric.tor_state(pod, idx).table.read_all(Direction::egress);
    msg.tag = encode(PathTag{kExpeditusTpid, TripFlag::outbound, without_failure_bits(egress)});
    return hash_up(fabric, topo.tor(pod, idx), std::move(msg));
}

Outcome ExpeditusScheme::on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    const LinkKind arrived = topo.link(via).kind;
    const int half = topo.half(), cpg = topo.cores_per_group();

    if (self.kind == NodeKind::core) return Outcome{{forward_down(fabric, at, std::move(msg))}, {}};

    if (self.kind == NodeKind::agg && arrived == LinkKind::tor_up) {
        if (msg.kind == MessageKind::exp_request) return hash_up(fabric, at, std::move(msg));
        if (msg.kind == MessageKind::exp_response) {
            // Destination aggregation: stage-2 metrics are its ingress loads.
            PathTag tag = decode(msg.tag, kExpeditusTpid);
            auto ingress = without_failure_bits(fabric.agg_state(self.pod, self.index).table.read_all(Direction::ingress));
            tag.cm.insert(tag.cm.end(), ingress.begin(), ingress.end());
            msg.tag = encode(tag);
            return hash_up(fabric, at, std::move(msg));
        }
    } else if (self.kind == NodeKind::agg && arrived == LinkKind::core_down) {
        if (msg.kind == MessageKind::exp_request) return Outcome{{forward_down(fabric, at, std::move(msg))}, {}};
        if (msg.kind == MessageKind::exp_response) {
            AggState& agg = fabric.agg_state(self.pod, self.index);
            const PathTag tag = decode(msg.tag, kExpeditusTpid);
            if (tag.cm.size() != static_cast<std::size_t>(cpg)) throw std::logic_error("Exp-response CM length");
            const auto egress = agg.table.read_all(Direction::egress);
            const auto core = select_min_max(egress, tag.cm);
            if (!core) return Outcome{{}, {make_notice(Notice::Kind::no_uplink, msg, at)}};
            agg.pat.confirm(msg.flow(), *core);
            return Outcome{{forward_down(fabric, at, std::move(msg))}, {}};
        }
    } else if (self.kind == NodeKind::tor && arrived == LinkKind::agg_down) {
        const int from_agg = topo.info(topo.link(via).src).index;
        if (msg.kind == MessageKind::exp_request) {
            const PathTag tag = decode(msg.tag, kExpeditusTpid);
            if (tag.cm.size() != static_cast<std::size_t>(half)) throw std::logic_error("Exp-request CM length");
            const auto ingress =
                without_failure_bits(fabric.tor_state(self.pod, self.index).table.read_all(Direction::ingress));
            const int j = select_min_max(tag.cm, ingress).value_or(from_agg);

            ControlMessage resp;
            resp.kind = MessageKind::exp_response;
            resp.header = msg.header.swapped();
            resp.flow_id = msg.flow_id;
            resp.incarnation = msg.incarnation;
            resp.tag = encode(PathTag{kExpeditusTpid, TripFlag::inbound, {}});
            Outcome out;
            out.emit.push_back({std::move(resp), topo.tor_up(self.pod, self.index, j)});
            out.notices.push_back(make_notice(Notice::Kind::syn_delivered, msg, at));
            return out;
        }
        if (msg.kind == MessageKind::exp_response) {
            fabric.tor_state(self.pod, self.index).pat.confirm(msg.flow(), from_agg);
            return Outcome{{}, {make_notice(Notice::Kind::path_decided, msg, at, self.pod, from_agg)}};
        }
    }
    no_handler("expeditus", msg, at, via);
}

std::optional<PathId> ExpeditusScheme::data_path(Fabric& fabric, const FlowView& flow) {
    return hashed_data_path(fabric, flow, true);
}

// ---- Optimal ---------------------------------------------------------------

std::optional<PathId> optimal_select(const FatTree& topo, std::span<const CongestionEntry> snapshot, HostId src,
                                     HostId dst) {
    std::optional<PathId> best;
    int best_worst = kFailedMetric;
    for (const auto& p : topo.enumerate_paths(src, dst)) {
        const auto hops = topo.monitored_hops(p);
        const std::array<CongestionEntry, 4> e{snapshot[hops[0]], snapshot[hops[1]], snapshot[hops[2]],
                                               snapshot[hops[3]]};
        const int w = worst_metric(e);
        if (w < best_worst) {
            best = p;
            best_worst = w;
        }
    }
    return best;
}

Outcome OptimalScheme::on_new_flow(Fabric& fabric, const FlowView& flow) {
    const auto& topo = fabric.topo();
    const int sp = topo.pod_of_host(flow.src_host), ti = topo.tor_index_of_host(flow.src_host);
    ControlMessage msg = new_message(MessageKind::syn, flow);
    const auto snapshot = fabric.snapshot();
    const auto path = optimal_select(topo, snapshot, flow.src_host, flow.dst_host);
    Outcome out;
    if (!path) {
        out.notices.push_back(make_notice(Notice::Kind::no_uplink, msg, topo.tor(sp, ti)));
        return out;
    }
    fabric.tor_state(sp, ti).pat.confirm(flow.tuple, path->agg_index);
    fabric.agg_state(sp, path->agg_index).pat.confirm(flow.tuple, path->core_member);
    out.notices.push_back(make_notice(Notice::Kind::path_decided, msg, topo.tor(sp, ti), sp, path->agg_index));
    out.emit.push_back({std::move(msg), topo.tor_up(sp, ti, path->agg_index)});
    return out;
}

Outcome OptimalScheme::on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    const LinkKind arrived = topo.link(via).kind;
    if (self.kind == NodeKind::core || (self.kind == NodeKind::agg && arrived == LinkKind::core_down))
        return Outcome{{forward_down(fabric, at, std::move(msg))}, {}};
    if (self.kind == NodeKind::agg && arrived == LinkKind::tor_up) {
        if (auto m = fabric.agg_state(self.pod, self.index).pat.lookup(msg.flow())) {
            const LinkId l = topo.agg_up(self.pod, self.index, *m);
            return Outcome{{{std::move(msg), l}}, {}};
        }
        return hash_up(fabric, at, std::move(msg));
    }
    if (self.kind == NodeKind::tor && arrived == LinkKind::agg_down)
        return Outcome{{}, {make_notice(Notice::Kind::syn_delivered, msg, at)}};
    no_handler("optimal", msg, at, via);
}

std::optional<PathId> OptimalScheme::data_path(Fabric& fabric, const FlowView& flow) {
    return hashed_data_path(fabric, flow, true);
}

}  // namespace caft
