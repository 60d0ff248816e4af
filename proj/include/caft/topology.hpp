#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace caft {

using NodeId = std::uint32_t;
using LinkId = std::uint32_t;
using HostId = std::uint32_t;

enum class NodeKind : std::uint8_t { host, tor, agg, core };

enum class LinkKind : std::uint8_t {
    host_up,    // host -> its ToR
    host_down,  // ToR -> host
    tor_up,     // t(p,i) -> a(p,j), ToR uplink port j
    agg_down,   // a(p,j) -> t(p,i)
    agg_up,     // a(p,g) -> c(g,m), aggregation uplink port m
    core_down,  // c(g,m) -> a(p,g)
};

struct Link {
    NodeId src;
    NodeId dst;
    LinkKind kind;
    double capacity_bps;
};

/// Position of a switch or host inside the fat-tree. For hosts `index` is the
/// ToR index within the pod and `member` the host slot under that ToR; for
/// cores `pod` is unused, `index` is the core group and `member` the position
/// within the group.
struct NodeInfo {
    NodeKind kind;
    int pod = -1;
    int index = 0;
    int member = 0;
};

/// One of the equal-cost inter-pod paths between two hosts. The aggregation
/// index fixes the core group; src and dst aggregation share that index.
struct PathId {
    HostId src_host;
    HostId dst_host;
    int agg_index;    // 0 .. k/2-1
    int core_member;  // 0 .. cores_per_group-1

    friend bool operator==(const PathId&, const PathId&) = default;
};

/// k-ary fat-tree with core oversubscription r. Identifiers are dense:
///
///   host  h = (pod * k/2 + tor) * k/2 + slot
///   ToR     = H + pod * k/2 + i
///   agg     = H + T + pod * k/2 + j
///   core    = H + T + A + g * cores_per_group + m
///
/// Link ids are grouped by LinkKind in the enum order above, each group laid
/// out row-major over the indices in its accessor's argument order.
class FatTree {
  public:
    /// Throws ConfigError when k is odd or < 4, r < 1, or k/2 is not a
    /// multiple of r, or capacity is not positive.
    static FatTree build(int k, int oversubscription, double capacity_bps);

    int k() const { return k_; }
    int half() const { return half_; }
    int pods() const { return k_; }
    int oversubscription() const { return r_; }
    int cores_per_group() const { return cores_per_group_; }
    int hosts_per_tor() const { return half_; }
    double link_capacity() const { return capacity_; }

    std::size_t host_count() const { return hosts_; }
    std::size_t tor_count() const { return tors_; }
    std::size_t agg_count() const { return aggs_; }
    std::size_t core_count() const { return cores_; }
    std::size_t node_count() const { return hosts_ + tors_ + aggs_ + cores_; }
    std::size_t link_count() const { return links_.size(); }

    /// Equal-cost paths between any inter-pod host pair.
    std::size_t inter_pod_path_count() const {
        return static_cast<std::size_t>(half_) * cores_per_group_;
    }

    /// Sum of all aggregation-to-core uplink capacities.
    double core_bisection_bps() const {
        return static_cast<double>(k_) * half_ * cores_per_group_ * capacity_;
    }

    NodeId host(int pod, int tor, int slot) const;
    NodeId tor(int pod, int index) const;
    NodeId agg(int pod, int index) const;
    NodeId core(int group, int member) const;

    NodeInfo info(NodeId node) const;
    int pod_of_host(HostId h) const { return static_cast<int>(h) / (half_ * half_); }
    int tor_index_of_host(HostId h) const { return (static_cast<int>(h) / half_) % half_; }
    NodeId tor_of_host(HostId h) const { return tor(pod_of_host(h), tor_index_of_host(h)); }

    LinkId host_up(HostId h) const;
    LinkId host_down(HostId h) const;
    LinkId tor_up(int pod, int tor, int agg) const;
    LinkId agg_down(int pod, int agg, int tor) const;
    LinkId agg_up(int pod, int agg, int member) const;
    LinkId core_down(int group, int member, int pod) const;

    const Link& link(LinkId id) const { return links_.at(id); }
    const std::vector<Link>& links() const { return links_; }

    /// All equal-cost paths, aggregation index major, core member minor.
    /// Throws UnsupportedTraffic for same-pod pairs.
    std::vector<PathId> enumerate_paths(HostId src, HostId dst) const;

    /// The four monitored inter-switch hops: src ToR egress, src agg egress,
    /// dst agg ingress from the core, dst ToR ingress from the agg.
    std::array<LinkId, 4> monitored_hops(const PathId& path) const;

    /// Full host-to-host link sequence (access links included).
    std::array<LinkId, 6> path_links(const PathId& path) const;

    /// 32-bit address 10.pod.tor.(slot+2) used in five-tuples.
    std::uint32_t host_address(HostId h) const;
    HostId host_from_address(std::uint32_t addr) const;

  private:
    FatTree() = default;

    int k_ = 0;
    int half_ = 0;
    int r_ = 1;
    int cores_per_group_ = 0;
    double capacity_ = 0;
    std::size_t hosts_ = 0, tors_ = 0, aggs_ = 0, cores_ = 0;
    std::vector<Link> links_;
    std::array<LinkId, 6> kind_base_{};
};

}  // namespace caft
