#include "caft/caft_protocol.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace caft {

namespace {

PathTag read_tag(const ControlMessage& msg, std::size_t expected_noc) {
    PathTag tag = decode(msg.tag, kCaftTpid);
    if (tag.cm.size() != expected_noc)
        throw std::logic_error(fmt::format("{} carries {} metrics where the layout has {}", to_string(msg.kind),
                                           tag.cm.size(), expected_noc));
    return tag;
}

void append(std::vector<CongestionEntry>& to, const std::vector<CongestionEntry>& from) {
    to.insert(to.end(), from.begin(), from.end());
}

int pod_of_address(const FatTree& topo, std::uint32_t addr) { return topo.pod_of_host(topo.host_from_address(addr)); }

Notice notice(Notice::Kind kind, const ControlMessage& msg, NodeId node, int pod = -1, int port = -1) {
    return Notice{kind, msg.flow_id, msg.incarnation, node, pod, port};
}

// Records every flag of a remote aggregation's uplink vector in the local
// failure table; reports bits that newly turned on.
void learn_failures(AggState& agg, int remote_pod, std::span<const CongestionEntry> remote, const ControlMessage& msg,
                    NodeId at, Outcome& out) {
    for (std::size_t m = 0; m < remote.size(); ++m) {
        const bool failed = remote[m].failed;
        if (agg.ft.record(remote_pod, static_cast<int>(m), failed) && failed)
            out.notices.push_back(notice(Notice::Kind::failure_learned, msg, at, remote_pod, static_cast<int>(m)));
    }
}

}  // namespace

std::optional<int> choose_candidate(const CandidatePath& first, const CandidatePath& second) {
    const int w1 = first.worst(), w2 = second.worst();
    if (w1 >= kFailedMetric && w2 >= kFailedMetric) return std::nullopt;
    return w2 < w1 ? 1 : 0;
}

Outcome CaftScheme::on_new_flow(Fabric& fabric, const FlowView& flow) { return tor_on_new_flow(fabric, flow); }

Outcome CaftScheme::on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo where = topo.info(at);
    const LinkKind arrived = topo.link(via).kind;

    if (where.kind == NodeKind::core) return Outcome{{forward_down(fabric, at, std::move(msg))}, {}};

    if (where.kind == NodeKind::agg && arrived == LinkKind::tor_up) {
        if (msg.kind == MessageKind::message_request) return src_agg_on_request(fabric, at, std::move(msg));
        if (msg.kind == MessageKind::message_response) return dst_agg_on_response(fabric, at, std::move(msg));
    } else if (where.kind == NodeKind::agg && arrived == LinkKind::core_down) {
        if (msg.kind == MessageKind::message_request) return dst_agg_on_request(fabric, at, via, std::move(msg));
        if (msg.kind == MessageKind::core_pin_response) return src_agg_on_core_pin(fabric, at, via, msg);
        if (msg.kind == MessageKind::message_response) return src_agg_on_response(fabric, at, via, std::move(msg));
    } else if (where.kind == NodeKind::tor && arrived == LinkKind::agg_down) {
        if (msg.kind == MessageKind::message_request) return dst_tor_on_request(fabric, at, via, std::move(msg));
        if (msg.kind == MessageKind::message_response) return src_tor_on_response(fabric, at, via, msg);
    }
    throw std::logic_error(fmt::format("CAFT: no handler for {} at node {} via link {}", to_string(msg.kind), at, via));
}

// Step 1: tag with every egress uplink load, go up the least loaded uplink
// and pin the flow there provisionally.
Outcome CaftScheme::tor_on_new_flow(Fabric& fabric, const FlowView& flow) {
    const auto& topo = fabric.topo();
    const int pod = topo.pod_of_host(flow.src_host);
    const int idx = topo.tor_index_of_host(flow.src_host);
    TorState& tor = fabric.tor_state(pod, idx);

    ControlMessage msg;
    msg.kind = MessageKind::message_request;
    msg.header = flow.tuple;
    msg.flow_id = flow.id;
    msg.incarnation = flow.incarnation;

    const auto egress = tor.table.read_all(Direction::egress);
    auto uplink = select_min_max(egress, egress);
    Outcome out;
    if (!uplink) {
        out.notices.push_back(notice(Notice::Kind::no_uplink, msg, topo.tor(pod, idx)));
        return out;
    }
    tor.pending[flow.tuple] = FirstHop{*uplink, egress[static_cast<std::size_t>(*uplink)]};
    tor.pat.insert(flow.tuple, *uplink, true);

    msg.tag = encode(PathTag{kCaftTpid, TripFlag::outbound, egress});
    out.emit.push_back({std::move(msg), topo.tor_up(pod, idx, *uplink)});
    return out;
}

// Step 2: append egress-to-core loads (failure flags included), ECMP up,
// record the flow with valid=0.
Outcome CaftScheme::src_agg_on_request(Fabric& fabric, NodeId at, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    AggState& agg = fabric.agg_state(self.pod, self.index);

    PathTag tag = read_tag(msg, layout::request_at_src_agg(topo.half()));
    append(tag.cm, agg.table.read_all(Direction::egress));

    Outcome out;
    const int dst_pod = pod_of_address(topo, msg.header.dst_ip);
    const auto viable = fabric.agg_viable_uplinks(self.pod, self.index, dst_pod, true);
    if (viable.empty()) {
        out.notices.push_back(notice(Notice::Kind::no_uplink, msg, at));
        return out;
    }
    const int member = fabric.ecmp(at, msg.header, msg.incarnation, viable);
    agg.pat.insert(msg.flow(), member, false);

    msg.tag = encode(tag);
    out.emit.push_back({std::move(msg), topo.agg_up(self.pod, self.index, member)});
    return out;
}

// Step 3: learn remote failures, pick the core with min-max over
// (src agg egress, own ingress), pin it at the source aggregation through a
// core-pin response and pass (h2, h3) down with the ToR vector.
Outcome CaftScheme::dst_agg_on_request(Fabric& fabric, NodeId at, LinkId /*via*/, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    AggState& agg = fabric.agg_state(self.pod, self.index);
    const int half = topo.half(), cpg = topo.cores_per_group();
    const int src_pod = pod_of_address(topo, msg.header.src_ip);

    PathTag tag = read_tag(msg, layout::request_at_dst_agg(half, cpg));
    const std::span<const CongestionEntry> src_agg_egress(tag.cm.data() + half, static_cast<std::size_t>(cpg));

    Outcome out;
    learn_failures(agg, src_pod, src_agg_egress, msg, at, out);

    const auto ingress = agg.table.read_all(Direction::ingress);
    const auto core = select_min_max(src_agg_egress, ingress,
                                      [&](int m) { return agg.ft.is_failed(src_pod, m); });

    CongestionEntry h2 = CongestionEntry::failed_marker(), h3 = CongestionEntry::failed_marker();
    if (core) {
        h2 = src_agg_egress[static_cast<std::size_t>(*core)];
        h3 = ingress[static_cast<std::size_t>(*core)];

        ControlMessage pin;
        pin.kind = MessageKind::core_pin_response;
        pin.header = msg.header.swapped();
        pin.tag = encode(PathTag{kCaftTpid, TripFlag::outbound, {}});
        pin.flow_id = msg.flow_id;
        pin.incarnation = msg.incarnation;
        out.emit.push_back({std::move(pin), topo.agg_up(self.pod, self.index, *core)});
    }

    tag.cm.resize(static_cast<std::size_t>(half));
    tag.cm.push_back(h2);
    tag.cm.push_back(h3);
    msg.tag = encode(tag);
    out.emit.push_back(forward_down(fabric, at, std::move(msg)));
    return out;
}

Outcome CaftScheme::src_agg_on_core_pin(Fabric& fabric, NodeId at, LinkId via, const ControlMessage& msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    const NodeInfo core = topo.info(topo.link(via).src);
    fabric.agg_state(self.pod, self.index).pat.confirm(msg.flow(), core.member);
    return {};
}

// Step 4: choose the second candidate's aggregation (never the forwarder),
// answer toward the source through it and deliver the SYN.
Outcome CaftScheme::dst_tor_on_request(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    TorState& tor = fabric.tor_state(self.pod, self.index);
    const int half = topo.half();
    const int forwarder = topo.info(topo.link(via).src).index;

    const PathTag tag = read_tag(msg, layout::request_at_dst_tor(half));
    const std::span<const CongestionEntry> src_tor_egress(tag.cm.data(), static_cast<std::size_t>(half));
    const auto ingress = tor.table.read_all(Direction::ingress);

    const auto second = select_min_max(src_tor_egress, ingress, [&](int j) { return j == forwarder; });

    ControlMessage resp;
    resp.kind = MessageKind::message_response;
    resp.header = msg.header.swapped();
    resp.flow_id = msg.flow_id;
    resp.incarnation = msg.incarnation;
    const CongestionEntry h4 = ingress[static_cast<std::size_t>(forwarder)];
    const CongestionEntry h4b = second ? ingress[static_cast<std::size_t>(*second)] : CongestionEntry::failed_marker();
    const std::size_t h2_at = static_cast<std::size_t>(half);
    resp.tag = encode(PathTag{kCaftTpid, TripFlag::inbound, {tag.cm[h2_at], tag.cm[h2_at + 1], h4, h4b}});

    Outcome out;
    out.emit.push_back({std::move(resp), topo.tor_up(self.pod, self.index, second.value_or(forwarder))});
    out.notices.push_back(notice(Notice::Kind::syn_delivered, msg, at));
    return out;
}

Outcome CaftScheme::dst_agg_on_response(Fabric& fabric, NodeId at, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    AggState& agg = fabric.agg_state(self.pod, self.index);

    PathTag tag = read_tag(msg, layout::response_at_dst_agg);
    append(tag.cm, agg.table.read_all(Direction::ingress));

    Outcome out;
    const int src_pod = pod_of_address(topo, msg.header.dst_ip);
    const auto viable = fabric.agg_viable_uplinks(self.pod, self.index, src_pod, true);
    if (viable.empty()) {
        out.notices.push_back(notice(Notice::Kind::no_uplink, msg, at));
        return out;
    }
    const int member = fabric.ecmp(at, msg.header, msg.incarnation, viable);
    msg.tag = encode(tag);
    out.emit.push_back({std::move(msg), topo.agg_up(self.pod, self.index, member)});
    return out;
}

// Second candidate's core: min-max over (own egress, dst agg ingress), pin
// it, and hand (h2', h3') down to the source ToR.
Outcome CaftScheme::src_agg_on_response(Fabric& fabric, NodeId at, LinkId /*via*/, ControlMessage msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    AggState& agg = fabric.agg_state(self.pod, self.index);
    const int cpg = topo.cores_per_group();
    const int dst_pod = pod_of_address(topo, msg.header.src_ip);

    PathTag tag = read_tag(msg, layout::response_at_src_agg(cpg));
    const std::span<const CongestionEntry> dst_agg_ingress(tag.cm.data() + layout::response_at_dst_agg,
                                                           static_cast<std::size_t>(cpg));

    Outcome out;
    learn_failures(agg, dst_pod, dst_agg_ingress, msg, at, out);

    const auto egress = agg.table.read_all(Direction::egress);
    const auto core = select_min_max(egress, dst_agg_ingress,
                                     [&](int m) { return agg.ft.is_failed(dst_pod, m); });
    CongestionEntry h2 = CongestionEntry::failed_marker(), h3 = CongestionEntry::failed_marker();
    if (core) {
        h2 = egress[static_cast<std::size_t>(*core)];
        h3 = dst_agg_ingress[static_cast<std::size_t>(*core)];
        agg.pat.confirm(msg.flow(), *core);
    }
    tag.cm.resize(layout::response_at_dst_agg);
    tag.cm.push_back(h2);
    tag.cm.push_back(h3);
    msg.tag = encode(tag);
    out.emit.push_back(forward_down(fabric, at, std::move(msg)));
    return out;
}

// Final decision between the two candidates.
Outcome CaftScheme::src_tor_on_response(Fabric& fabric, NodeId at, LinkId via, const ControlMessage& msg) {
    const auto& topo = fabric.topo();
    const NodeInfo self = topo.info(at);
    TorState& tor = fabric.tor_state(self.pod, self.index);
    const int second_agg = topo.info(topo.link(via).src).index;
    const FiveTuple flow = msg.flow();

    const PathTag tag = read_tag(msg, layout::response_at_src_tor);
    const auto& cm = tag.cm;

    CandidatePath first, second;
    if (auto it = tor.pending.find(flow); it != tor.pending.end()) {
        first.agg_index = it->second.port;
        first.hops = {it->second.entry, cm[0], cm[1], cm[2]};
        tor.pending.erase(it);
    } else {
        first.hops.fill(CongestionEntry::failed_marker());
    }
    second.agg_index = second_agg;
    second.hops = {tor.table.read_entry(second_agg, Direction::egress), cm[4], cm[5], cm[3]};
    last_candidates_ = {first, second};

    Outcome out;
    const auto winner = choose_candidate(first, second);
    if (!winner) {
        out.notices.push_back(notice(Notice::Kind::setup_void, msg, at));
        return out;
    }
    const int port = *winner == 0 ? first.agg_index : second.agg_index;
    tor.pat.confirm(flow, port);
    out.notices.push_back(notice(Notice::Kind::path_decided, msg, at, self.pod, port));
    return out;
}

std::optional<PathId> CaftScheme::data_path(Fabric& fabric, const FlowView& flow) {
    const auto& topo = fabric.topo();
    const int sp = topo.pod_of_host(flow.src_host), dp = topo.pod_of_host(flow.dst_host);
    const int ti = topo.tor_index_of_host(flow.src_host);

    TorState& tor = fabric.tor_state(sp, ti);
    auto up = tor.pat.lookup(flow.tuple);
    if (!up) {
        const auto viable = fabric.tor_viable_uplinks(sp, ti);
        if (viable.empty()) return std::nullopt;
        up = fabric.ecmp(topo.tor(sp, ti), flow.tuple, flow.incarnation, viable);
    }
    AggState& agg = fabric.agg_state(sp, *up);
    auto member = agg.pat.lookup(flow.tuple);
    if (!member) {
        const auto viable = fabric.agg_viable_uplinks(sp, *up, dp, true);
        if (viable.empty()) return std::nullopt;
        member = fabric.ecmp(topo.agg(sp, *up), flow.tuple, flow.incarnation, viable);
    }
    return PathId{flow.src_host, flow.dst_host, *up, *member};
}

}  // namespace caft
