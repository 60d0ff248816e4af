#include "caft/fabric.hpp"

#include <fmt/format.h>

#include "caft/baselines.hpp"
#include "caft/errors.hpp"

namespace caft {

std::string_view to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::syn: return "syn";
        case MessageKind::message_request: return "message_request";
        case MessageKind::message_response: return "message_response";
        case MessageKind::core_pin_response: return "core_pin_response";
        case MessageKind::exp_request: return "exp_request";
        case MessageKind::exp_response: return "exp_response";
    }
    return "?";
}

Fabric::Fabric(const FatTree& topo, FabricParams params)
    : topo_(&topo), params_(params), failed_links_(topo.link_count(), false), monitors_(topo.link_count()) {
    const int k = topo.k(), half = topo.half(), cpg = topo.cores_per_group();
    const double cap = topo.link_capacity();
    tors_.reserve(topo.tor_count());
    aggs_.reserve(topo.agg_count());
    for (int p = 0; p < k; ++p)
        for (int i = 0; i < half; ++i)
            tors_.push_back(TorState{CongestionTable(half, params.dre, cap),
                                     PathAllocationTable(params.pat_size, mix64(params.seed ^ topo.tor(p, i))),
                                     {}});
    for (int p = 0; p < k; ++p)
        for (int j = 0; j < half; ++j)
            aggs_.push_back(AggState{CongestionTable(cpg, params.dre, cap),
                                     PathAllocationTable(params.pat_size, mix64(params.seed ^ topo.agg(p, j))),
                                     FailureTable(k, p, cpg)});

    for (int p = 0; p < k; ++p) {
        for (int i = 0; i < half; ++i)
            for (int j = 0; j < half; ++j) {
                monitors_[topo.tor_up(p, i, j)] = {true, p, i, j, Direction::egress};
                monitors_[topo.agg_down(p, j, i)] = {true, p, i, j, Direction::ingress};
            }
        for (int j = 0; j < half; ++j)
            for (int m = 0; m < cpg; ++m) {
                monitors_[topo.agg_up(p, j, m)] = {false, p, j, m, Direction::egress};
                monitors_[topo.core_down(j, m, p)] = {false, p, j, m, Direction::ingress};
            }
    }
}

TorState& Fabric::tor_state(int pod, int index) { return tors_.at(static_cast<std::size_t>(pod * topo_->half() + index)); }
AggState& Fabric::agg_state(int pod, int index) { return aggs_.at(static_cast<std::size_t>(pod * topo_->half() + index)); }
const TorState& Fabric::tor_state(int pod, int index) const {
    return tors_.at(static_cast<std::size_t>(pod * topo_->half() + index));
}
const AggState& Fabric::agg_state(int pod, int index) const {
    return aggs_.at(static_cast<std::size_t>(pod * topo_->half() + index));
}

void Fabric::fail_link(int pod, int agg, int member) {
    if (pod < 0 || pod >= topo_->pods() || agg < 0 || agg >= topo_->half() || member < 0 ||
        member >= topo_->cores_per_group())
        throw LookupError(fmt::format("no agg-core link a({},{})-c({},{})", pod, agg, agg, member));
    failed_links_[topo_->agg_up(pod, agg, member)] = true;
    failed_links_[topo_->core_down(agg, member, pod)] = true;
    agg_state(pod, agg).table.set_failed(member, true);
}

std::uint64_t Fabric::salt(NodeId node) const { return mix64(params_.seed * 0x9e3779b97f4a7c15ULL + node); }

int Fabric::ecmp(NodeId node, const FiveTuple& header, std::uint32_t incarnation, std::span<const int> viable) const {
    return ecmp_select(header, viable, salt(node) ^ mix64(incarnation));
}

std::vector<int> Fabric::tor_viable_uplinks(int pod, int index) const {
    const auto& t = tor_state(pod, index).table;
    std::vector<int> out;
    for (int j = 0; j < t.uplinks(); ++j)
        if (!t.is_failed(j)) out.push_back(j);
    return out;
}

std::vector<int> Fabric::agg_viable_uplinks(int pod, int index, int remote_pod, bool use_ft) const {
    const auto& a = agg_state(pod, index);
    std::vector<int> out;
    for (int m = 0; m < a.table.uplinks(); ++m) {
        if (a.table.is_failed(m)) continue;
        if (use_ft && remote_pod != pod && a.ft.is_failed(remote_pod, m)) continue;
        out.push_back(m);
    }
    return out;
}

DreRegister* Fabric::monitor(LinkId link) {
    return const_cast<DreRegister*>(static_cast<const Fabric*>(this)->monitor(link));
}

const DreRegister* Fabric::monitor(LinkId link) const {
    const auto& ref = monitors_.at(link);
    if (ref.pod < 0) return nullptr;
    if (ref.is_tor) return &tor_state(ref.pod, ref.index).table.dre(ref.port, ref.dir);
    return &agg_state(ref.pod, ref.index).table.dre(ref.port, ref.dir);
}

CongestionEntry Fabric::hop_entry(LinkId link) const {
    const auto& ref = monitors_.at(link);
    if (ref.pod < 0) return {};
    if (ref.is_tor) return tor_state(ref.pod, ref.index).table.read_entry(ref.port, ref.dir);
    return agg_state(ref.pod, ref.index).table.read_entry(ref.port, ref.dir);
}

std::vector<CongestionEntry> Fabric::snapshot() const {
    std::vector<CongestionEntry> out(topo_->link_count());
    for (LinkId l = 0; l < out.size(); ++l) out[l] = hop_entry(l);
    return out;
}

}  // namespace caft
