#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include "caft/fabric.hpp"

namespace caft {

enum class SchemeKind : std::uint8_t { caft, expeditus, ecmp, optimal };

std::string_view to_string(SchemeKind kind);
/// Throws ConfigError for unknown names.
SchemeKind scheme_from_string(std::string_view name);

/// Identity of a flow as seen by the data plane.
struct FlowView {
    std::uint64_t id = 0;
    FiveTuple tuple;
    HostId src_host;
    HostId dst_host;
    std::uint32_t incarnation = 0;
};

/// Path-selection behaviour executed by every switch of a run.
class Scheme {
  public:
    virtual ~Scheme() = default;

    virtual SchemeKind kind() const = 0;

    /// The connection's first packet reaches the source ToR from the host.
    virtual Outcome on_new_flow(Fabric& fabric, const FlowView& flow) = 0;

    /// A control message arrives at switch `at` over link `via`.
    virtual Outcome on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) = 0;

    /// Path data packets of the flow take now, resolved hop by hop through the
    /// source ToR and source aggregation forwarding state. nullopt when a
    /// switch has no viable uplink.
    virtual std::optional<PathId> data_path(Fabric& fabric, const FlowView& flow) = 0;

  protected:
    /// Forwarding shared by all schemes for the deterministic downhill half of
    /// a path: core -> destination pod, aggregation -> destination ToR.
    static Emission forward_down(const Fabric& fabric, NodeId at, ControlMessage msg);
};

std::unique_ptr<Scheme> make_scheme(SchemeKind kind);

}  // namespace caft
