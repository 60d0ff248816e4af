#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "caft/fabric.hpp"
#include "caft/scheme.hpp"
#include "caft/sim_time.hpp"
#include "caft/workload.hpp"

namespace caft {

using namespace std::chrono_literals;

struct EngineConfig {
    DreParams dre{};
    /// Fabric RTT / 8: four switch-to-switch hops each way.
    SimTime per_hop_latency = std::chrono::duration_cast<SimTime>(2500ns);
    SimTime pat_timeout = std::chrono::duration_cast<SimTime>(100ms);
    std::size_t pat_size = PathAllocationTable::kDefaultSize;
    SimTime retry_timeout = std::chrono::duration_cast<SimTime>(10ms);
    int max_retries = 3;

    /// Throws ConfigError when a constant is not positive.
    void validate() const;
};

struct AggCoreLink {
    int pod;
    int agg;
    int member;
    friend bool operator==(const AggCoreLink&, const AggCoreLink&) = default;
};

/// Links cut at t = 0.
struct FailurePlan {
    std::vector<AggCoreLink> links;

    /// `count` distinct agg-core links drawn uniformly at random.
    static FailurePlan random(const FatTree& topo, int count, std::uint64_t seed);
};

enum class FlowState : std::uint8_t { pending, setup, established, transferring, done, failed };

std::string_view to_string(FlowState s);

struct FlowRecord {
    std::uint64_t id = 0;
    FiveTuple tuple;
    HostId src_host = 0;
    HostId dst_host = 0;
    std::uint64_t size_bytes = 0;
    SimTime arrival{};
    SimTime start{};
    SimTime completion{};
    std::optional<PathId> path;
    int retries = 0;
    FlowState state = FlowState::pending;

    double fct_s() const { return to_seconds(completion - arrival); }
    double throughput_bps() const { return static_cast<double>(size_bytes) * 8.0 / fct_s(); }
};

/// Data path resolved when a connection was established.
struct PathPin {
    std::uint64_t flow_id;
    std::uint32_t incarnation;
    SimTime time;
    std::optional<PathId> path;
    bool blackholed;
};

struct MessageDrop {
    std::uint64_t flow_id;
    std::uint32_t incarnation;
    SimTime time;
    MessageKind kind;
    LinkId link;
};

struct FailureLearned {
    SimTime time;
    NodeId node;
    int pod;
    int port;
};

struct RunResult {
    std::vector<FlowRecord> flows;
    std::vector<PathPin> pins;
    std::vector<MessageDrop> drops;
    std::vector<FailureLearned> learned;
    /// Largest |delivered - size| / size over completed flows.
    double max_conservation_error = 0.0;
    /// Largest per-link (allocated - capacity) seen at any recomputation; 0
    /// when no link was ever over capacity.
    double max_link_excess_bps = 0.0;
    std::uint64_t events = 0;
    std::uint64_t rate_recomputations = 0;
    SimTime end_time{};
};

/// Deterministic discrete-event run of one scheme over one workload. Flow
/// transport is fluid: established flows share links max-min fairly and the
/// allocation is recomputed whenever the set of transferring flows changes.
class Simulator {
  public:
    Simulator(const FatTree& topo, SchemeKind scheme, EngineConfig config, std::uint64_t seed);
    ~Simulator();

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    void apply(const FailurePlan& plan);

    /// Runs every flow to done or failed. Flows must be sorted by arrival.
    RunResult run(std::span<const FlowSpec> flows);

    Fabric& fabric() { return fabric_; }
    Scheme& scheme() { return *scheme_; }

  private:
    struct Impl;

    const FatTree& topo_;
    EngineConfig config_;
    std::uint64_t seed_;
    Fabric fabric_;
    std::unique_ptr<Scheme> scheme_;
};

/// Five-tuple the engine assigns to a flow: host addresses, source port
/// 1024 + id mod 64000, destination port 80, TCP.
FiveTuple flow_tuple(const FatTree& topo, const FlowSpec& flow);

/// Convenience wrapper: build a simulator, apply failures, run.
RunResult run(const FatTree& topo, SchemeKind scheme, std::span<const FlowSpec> flows, const FailurePlan& failures,
              const EngineConfig& config, std::uint64_t seed);

}  // namespace caft
