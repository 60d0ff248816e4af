#pragma once

#include <optional>
#include <span>
#include <vector>

#include "caft/scheme.hpp"

namespace caft {

/// viable[flow_hash(tuple, salt) mod viable.size()]. Throws std::invalid_argument
/// on an empty set (callers drop the packet instead of calling).
int ecmp_select(const FiveTuple& tuple, std::span<const int> viable, std::uint64_t salt);

/// Congestion-agnostic hashing at every uplink choice.
class EcmpScheme final : public Scheme {
  public:
    SchemeKind kind() const override { return SchemeKind::ecmp; }
    Outcome on_new_flow(Fabric& fabric, const FlowView& flow) override;
    Outcome on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) override;
    std::optional<PathId> data_path(Fabric& fabric, const FlowView& flow) override;
};

/// Two-stage selection: the destination ToR picks the aggregation index from
/// the source ToR's egress vector, then the source aggregation of that index
/// picks the core from the destination aggregation's ingress vector carried
/// by the Exp-response. No failure tables and no failure bits on the wire: a
/// switch reports its own dead uplink as fully loaded. Until the response
/// lands (or if it is lost) the flow follows its ECMP default path.
class ExpeditusScheme final : public Scheme {
  public:
    SchemeKind kind() const override { return SchemeKind::expeditus; }
    Outcome on_new_flow(Fabric& fabric, const FlowView& flow) override;
    Outcome on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) override;
    std::optional<PathId> data_path(Fabric& fabric, const FlowView& flow) override;
};

/// argmin over every non-failed path of its worst monitored hop, lowest
/// (agg, core) on ties. `snapshot` is indexed by LinkId.
std::optional<PathId> optimal_select(const FatTree& topo, std::span<const CongestionEntry> snapshot, HostId src,
                                     HostId dst);

/// Global-knowledge baseline: decides instantly from a snapshot of every
/// table when the SYN reaches the source ToR and installs the decision in the
/// source ToR and source aggregation tables.
class OptimalScheme final : public Scheme {
  public:
    SchemeKind kind() const override { return SchemeKind::optimal; }
    Outcome on_new_flow(Fabric& fabric, const FlowView& flow) override;
    Outcome on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) override;
    std::optional<PathId> data_path(Fabric& fabric, const FlowView& flow) override;
};

}  // namespace caft
