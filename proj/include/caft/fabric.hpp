#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "caft/congestion.hpp"
#include "caft/switch_tables.hpp"
#include "caft/topology.hpp"

namespace caft {

enum class MessageKind : std::uint8_t {
    syn,                // untagged connection setup (ECMP, Optimal)
    message_request,    // CAFT outbound, TF=0
    message_response,   // CAFT inbound, TF=1
    core_pin_response,  // CAFT empty-payload response, TF=0, ends at the source aggregation
    exp_request,        // Expeditus stage 1
    exp_response,       // Expeditus stage 2
};

std::string_view to_string(MessageKind kind);

struct ControlMessage {
    MessageKind kind = MessageKind::syn;
    /// IP header as carried on the wire; responses travel with addresses and
    /// ports swapped relative to the flow.
    FiveTuple header;
    /// Encoded PathTag; empty for untagged packets.
    std::vector<std::uint8_t> tag;
    /// Simulator bookkeeping only.
    std::uint64_t flow_id = 0;
    std::uint32_t incarnation = 0;

    bool is_reverse() const {
        return kind == MessageKind::message_response || kind == MessageKind::core_pin_response ||
               kind == MessageKind::exp_response;
    }
    /// Five-tuple of the flow this message sets up (undoes the response swap).
    FiveTuple flow() const { return is_reverse() ? header.swapped() : header; }
};

struct Emission {
    ControlMessage msg;
    LinkId link;
};

struct Notice {
    enum class Kind : std::uint8_t {
        syn_delivered,    // request/SYN reached the destination ToR
        path_decided,     // source ToR pinned the flow (port = ToR uplink)
        failure_learned,  // failure table bit went 0 -> 1 (node, pod, port)
        setup_void,       // both candidates invalid at the source ToR
        no_uplink,        // a switch had no viable uplink and dropped the packet
    };
    Kind kind;
    std::uint64_t flow_id = 0;
    std::uint32_t incarnation = 0;
    NodeId node = 0;
    int pod = -1;
    int port = -1;
};

struct Outcome {
    std::vector<Emission> emit;
    std::vector<Notice> notices;
};

struct FirstHop {
    int port;
    CongestionEntry entry;
};

struct TorState {
    CongestionTable table;
    PathAllocationTable pat;
    /// Step-1 uplink choice per flow awaiting its message-response.
    std::unordered_map<FiveTuple, FirstHop, FiveTupleHasher> pending;
};

struct AggState {
    CongestionTable table;
    PathAllocationTable pat;
    FailureTable ft;
};

struct FabricParams {
    DreParams dre{};
    std::size_t pat_size = PathAllocationTable::kDefaultSize;
    std::uint64_t seed = 1;
};

/// Data-plane state of every ToR and aggregation switch of one run plus the
/// physical failure status of agg-core links.
class Fabric {
  public:
    Fabric(const FatTree& topo, FabricParams params);

    const FatTree& topo() const { return *topo_; }
    const FabricParams& params() const { return params_; }

    TorState& tor_state(int pod, int index);
    AggState& agg_state(int pod, int index);
    const TorState& tor_state(int pod, int index) const;
    const AggState& agg_state(int pod, int index) const;

    /// Cuts the physical link between a(pod, agg) and c(agg, member); both
    /// directions go down and the aggregation switch marks the port failed.
    void fail_link(int pod, int agg, int member);
    bool link_failed(LinkId link) const { return failed_links_[link]; }

    /// Per-switch ECMP salt derived from the run seed and the switch id.
    std::uint64_t salt(NodeId node) const;

    /// ECMP choice among `viable`; the connection incarnation is mixed into
    /// the hash seed so that a retried connection may re-hash.
    int ecmp(NodeId node, const FiveTuple& header, std::uint32_t incarnation, std::span<const int> viable) const;

    /// Uplinks of a ToR that are physically up.
    std::vector<int> tor_viable_uplinks(int pod, int index) const;
    /// Uplinks of an aggregation switch that are up and, when `use_ft`, not
    /// flagged in its failure table toward `remote_pod`.
    std::vector<int> agg_viable_uplinks(int pod, int index, int remote_pod, bool use_ft) const;

    /// Register monitoring `link`, or nullptr for links no table covers
    /// (host access links). Every tor_up, agg_down, agg_up and core_down link
    /// is monitored by exactly one table.
    DreRegister* monitor(LinkId link);
    const DreRegister* monitor(LinkId link) const;

    /// Current table entry for a monitored link (failure flag included).
    CongestionEntry hop_entry(LinkId link) const;

    /// Entries of every link, indexed by LinkId; unmonitored links read idle.
    std::vector<CongestionEntry> snapshot() const;

  private:
    struct MonitorRef {
        bool is_tor = false;
        int pod = -1;
        int index = 0;
        int port = 0;
        Direction dir = Direction::egress;
    };

    const FatTree* topo_;
    FabricParams params_;
    std::vector<TorState> tors_;
    std::vector<AggState> aggs_;
    std::vector<bool> failed_links_;
    std::vector<MonitorRef> monitors_;
};

}  // namespace caft
