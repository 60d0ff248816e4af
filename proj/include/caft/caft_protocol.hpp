#pragma once

#include <array>
#include <optional>

#include "caft/scheme.hpp"
#include "caft/wire_tags.hpp"

namespace caft {

/// CM layouts of the round trip (half = k/2 ToR uplinks, cpg = cores per group):
///
///   request   src ToR -> src agg   [ToR egress x half]
///             src agg -> dst agg   [ToR egress x half | src agg egress x cpg]
///             dst agg -> dst ToR   [ToR egress x half | h2 | h3]
///   response  dst ToR -> dst agg j [h2 | h3 | h4 | h4']
///             dst agg j -> src agg [h2 | h3 | h4 | h4' | dst agg ingress x cpg]
///             src agg -> src ToR   [h2 | h3 | h4 | h4' | h2' | h3']
///   core pin  dst agg -> src agg   []
///
/// h1..h4 are the four monitored hops of candidate 1 (the aggregation index
/// the request went up through), primed values those of candidate 2. A
/// candidate with no viable core or aggregation is carried as failed entries.
namespace layout {
inline std::size_t request_at_src_agg(int half) { return static_cast<std::size_t>(half); }
inline std::size_t request_at_dst_agg(int half, int cpg) { return static_cast<std::size_t>(half + cpg); }
inline std::size_t request_at_dst_tor(int half) { return static_cast<std::size_t>(half + 2); }
inline constexpr std::size_t response_at_dst_agg = 4;
inline std::size_t response_at_src_agg(int cpg) { return static_cast<std::size_t>(4 + cpg); }
inline constexpr std::size_t response_at_src_tor = 6;
}  // namespace layout

/// One of the two candidate paths assembled at the source ToR.
struct CandidatePath {
    int agg_index = -1;
    std::array<CongestionEntry, 4> hops{};

    int worst() const { return worst_metric(hops); }
    bool valid() const { return worst() < kFailedMetric; }
};

/// Result of the final decision at the source ToR: winner is 0 or 1, or
/// nullopt when both candidates are invalid. Ties go to candidate 1.
std::optional<int> choose_candidate(const CandidatePath& first, const CandidatePath& second);

class CaftScheme final : public Scheme {
  public:
    SchemeKind kind() const override { return SchemeKind::caft; }

    Outcome on_new_flow(Fabric& fabric, const FlowView& flow) override;
    Outcome on_message(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg) override;
    std::optional<PathId> data_path(Fabric& fabric, const FlowView& flow) override;

    // Per-switch transitions, exposed individually for tests.
    Outcome tor_on_new_flow(Fabric& fabric, const FlowView& flow);
    Outcome src_agg_on_request(Fabric& fabric, NodeId at, ControlMessage msg);
    Outcome dst_agg_on_request(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg);
    Outcome src_agg_on_core_pin(Fabric& fabric, NodeId at, LinkId via, const ControlMessage& msg);
    Outcome dst_tor_on_request(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg);
    Outcome dst_agg_on_response(Fabric& fabric, NodeId at, ControlMessage msg);
    Outcome src_agg_on_response(Fabric& fabric, NodeId at, LinkId via, ControlMessage msg);
    Outcome src_tor_on_response(Fabric& fabric, NodeId at, LinkId via, const ControlMessage& msg);

    /// Candidates assembled by the last src_tor_on_response call.
    const std::pair<CandidatePath, CandidatePath>& last_candidates() const { return last_candidates_; }

  private:
    std::pair<CandidatePath, CandidatePath> last_candidates_;
};

}  // namespace caft
