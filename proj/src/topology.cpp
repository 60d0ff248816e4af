#include "caft/topology.hpp"

#include <fmt/format.h>

#include "caft/errors.hpp"
#include "caft/sim_time.hpp"

namespace caft {

std::string format_seconds(SimTime t) {
    auto fs = t.count();
    const char* sign = "";
    if (fs < 0) {
        sign = "-";
        fs = -fs;
    }
    constexpr std::int64_t per_second = 1'000'000'000'000'000LL;
    return fmt::format("{}{}.{:015d}", sign, fs / per_second, fs % per_second);
}

FatTree FatTree::build(int k, int oversubscription, double capacity_bps) {
    if (k < 4 || k % 2 != 0)
        throw ConfigError(fmt::format("fat-tree arity k must be even and >= 4 (got {})", k));
    if (oversubscription < 1)
        throw ConfigError(fmt::format("oversubscription r must be >= 1 (got {})", oversubscription));
    if ((k / 2) % oversubscription != 0)
        throw ConfigError(fmt::format("k/2 = {} is not divisible by oversubscription r = {}", k / 2,
                                      oversubscription));
    if (!(capacity_bps > 0))
        throw ConfigError("link capacity must be positive");

    FatTree t;
    t.k_ = k;
    t.half_ = k / 2;
    t.r_ = oversubscription;
    t.cores_per_group_ = t.half_ / oversubscription;
    t.capacity_ = capacity_bps;
    t.hosts_ = static_cast<std::size_t>(k) * t.half_ * t.half_;
    t.tors_ = static_cast<std::size_t>(k) * t.half_;
    t.aggs_ = t.tors_;
    t.cores_ = static_cast<std::size_t>(t.half_) * t.cores_per_group_;

    const int h = t.half_;
    const int cpg = t.cores_per_group_;
    auto add = [&](NodeId s, NodeId d, LinkKind kind) { t.links_.push_back({s, d, kind, capacity_bps}); };

    t.kind_base_[0] = 0;
    for (std::size_t x = 0; x < t.hosts_; ++x)
        add(static_cast<NodeId>(x), t.tor_of_host(static_cast<HostId>(x)), LinkKind::host_up);
    t.kind_base_[1] = static_cast<LinkId>(t.links_.size());
    for (std::size_t x = 0; x < t.hosts_; ++x)
        add(t.tor_of_host(static_cast<HostId>(x)), static_cast<NodeId>(x), LinkKind::host_down);
    t.kind_base_[2] = static_cast<LinkId>(t.links_.size());
    for (int p = 0; p < k; ++p)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < h; ++j) add(t.tor(p, i), t.agg(p, j), LinkKind::tor_up);
    t.kind_base_[3] = static_cast<LinkId>(t.links_.size());
    for (int p = 0; p < k; ++p)
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < h; ++i) add(t.agg(p, j), t.tor(p, i), LinkKind::agg_down);
    t.kind_base_[4] = static_cast<LinkId>(t.links_.size());
    for (int p = 0; p < k; ++p)
        for (int j = 0; j < h; ++j)
            for (int m = 0; m < cpg; ++m) add(t.agg(p, j), t.core(j, m), LinkKind::agg_up);
    t.kind_base_[5] = static_cast<LinkId>(t.links_.size());
    for (int g = 0; g < h; ++g)
        for (int m = 0; m < cpg; ++m)
            for (int p = 0; p < k; ++p) add(t.core(g, m), t.agg(p, g), LinkKind::core_down);
    return t;
}

NodeId FatTree::host(int pod, int tor, int slot) const {
    return static_cast<NodeId>((pod * half_ + tor) * half_ + slot);
}
NodeId FatTree::tor(int pod, int index) const {
    return static_cast<NodeId>(hosts_ + static_cast<std::size_t>(pod * half_ + index));
}
NodeId FatTree::agg(int pod, int index) const {
    return static_cast<NodeId>(hosts_ + tors_ + static_cast<std::size_t>(pod * half_ + index));
}
NodeId FatTree::core(int group, int member) const {
    return static_cast<NodeId>(hosts_ + tors_ + aggs_ + static_cast<std::size_t>(group * cores_per_group_ + member));
}

NodeInfo FatTree::info(NodeId node) const {
    std::size_t n = node;
    if (n < hosts_) {
        int v = static_cast<int>(n);
        return {NodeKind::host, v / (half_ * half_), (v / half_) % half_, v % half_};
    }
    n -= hosts_;
    if (n < tors_) return {NodeKind::tor, static_cast<int>(n) / half_, static_cast<int>(n) % half_, 0};
    n -= tors_;
    if (n < aggs_) return {NodeKind::agg, static_cast<int>(n) / half_, static_cast<int>(n) % half_, 0};
    n -= aggs_;
    if (n < cores_)
        return {NodeKind::core, -1, static_cast<int>(n) / cores_per_group_, static_cast<int>(n) % cores_per_group_};
    throw LookupError(fmt::format("node id {} out of range", node));
}

LinkId FatTree::host_up(HostId h) const { return kind_base_[0] + h; }
LinkId FatTree::host_down(HostId h) const { return kind_base_[1] + h; }
LinkId FatTree::tor_up(int pod, int tor, int agg) const {
    return kind_base_[2] + static_cast<LinkId>((pod * half_ + tor) * half_ + agg);
}
LinkId FatTree::agg_down(int pod, int agg, int tor) const {
    return kind_base_[3] + static_cast<LinkId>((pod * half_ + agg) * half_ + tor);
}
LinkId FatTree::agg_up(int pod, int agg, int member) const {
    return kind_base_[4] + static_cast<LinkId>((pod * half_ + agg) * cores_per_group_ + member);
}
LinkId FatTree::core_down(int group, int member, int pod) const {
    return kind_base_[5] + static_cast<LinkId>((group * cores_per_group_ + member) * k_ + pod);
}

std::vector<PathId> FatTree::enumerate_paths(HostId src, HostId dst) const {
    if (src >= hosts_ || dst >= hosts_) throw LookupError("host id out of range");
    if (pod_of_host(src) == pod_of_host(dst))
        throw UnsupportedTraffic(fmt::format("hosts {} and {} share pod {}; only inter-pod traffic is modeled",
                                             src, dst, pod_of_host(src)));
    std::vector<PathId> out;
    out.reserve(inter_pod_path_count());
    for (int j = 0; j < half_; ++j)
        for (int m = 0; m < cores_per_group_; ++m) out.push_back({src, dst, j, m});
    return out;
}

std::array<LinkId, 4> FatTree::monitored_hops(const PathId& p) const {
    const int sp = pod_of_host(p.src_host), dp = pod_of_host(p.dst_host);
    return {tor_up(sp, tor_index_of_host(p.src_host), p.agg_index), agg_up(sp, p.agg_index, p.core_member),
            core_down(p.agg_index, p.core_member, dp), agg_down(dp, p.agg_index, tor_index_of_host(p.dst_host))};
}

std::array<LinkId, 6> FatTree::path_links(const PathId& p) const {
    auto hops = monitored_hops(p);
    return {host_up(p.src_host), hops[0], hops[1], hops[2], hops[3], host_down(p.dst_host)};
}

std::uint32_t FatTree::host_address(HostId h) const {
    auto pod = static_cast<std::uint32_t>(pod_of_host(h));
    auto t = static_cast<std::uint32_t>(tor_index_of_host(h));
    auto slot = static_cast<std::uint32_t>(h % half_);
    return (10u << 24) | (pod << 16) | (t << 8) | (slot + 2);
}

HostId FatTree::host_from_address(std::uint32_t addr) const {
    int pod = static_cast<int>((addr >> 16) & 0xff);
    int t = static_cast<int>((addr >> 8) & 0xff);
    int slot = static_cast<int>(addr & 0xff) - 2;
    if ((addr >> 24) != 10 || pod >= k_ || t >= half_ || slot < 0 || slot >= half_)
        throw LookupError(fmt::format("address {:#010x} is not a host of this fabric", addr));
    return host(pod, t, slot);
}

}  // namespace caft
