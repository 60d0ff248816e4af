#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace caft {

struct DreParams {
    double t_dre_s = 20e-6;
    double alpha = 0.1;
};

/// Discounting rate estimator for one direction of one link. The register
/// grows by the bytes seen on the link and decays by (1 - alpha) every
/// t_dre, so under a constant rate R (bits/s) it settles at R/8 * t_dre / alpha.
class DreRegister {
  public:
    DreRegister() = default;
    DreRegister(DreParams params, double capacity_bps);

    void observe(double bytes) { x_ += bytes; }
    void tick() { x_ *= 1.0 - params_.alpha; }

    double bytes() const { return x_; }
    void set_bytes(double x) { x_ = x; }

    /// Estimated utilization relative to capacity (may exceed 1 transiently).
    double utilization() const;

    /// 3-bit load code: min(7, floor(8 * utilization)).
    std::uint8_t quantize() const;

    const DreParams& params() const { return params_; }
    double capacity() const { return capacity_; }

  private:
    DreParams params_{};
    double capacity_ = 1.0;
    double x_ = 0.0;
};

/// Internal metric used for argmin selection: one above the largest load code.
inline constexpr int kFailedMetric = 8;

/// 4-bit congestion table entry. On the wire the failure flag is the most
/// significant bit of the nibble, followed by the 3-bit load.
struct CongestionEntry {
    bool failed = false;
    std::uint8_t load = 0;

    int metric() const { return failed ? kFailedMetric : load; }

    std::uint8_t to_nibble() const { return static_cast<std::uint8_t>((failed ? 0x8 : 0) | (load & 0x7)); }
    static CongestionEntry from_nibble(std::uint8_t n) {
        return {(n & 0x8) != 0, static_cast<std::uint8_t>(n & 0x7)};
    }
    static CongestionEntry failed_marker() { return {true, 0}; }

    friend bool operator==(const CongestionEntry&, const CongestionEntry&) = default;
};

enum class Direction : std::uint8_t { egress, ingress };

/// Per-switch table covering the uplink ports in both directions.
class CongestionTable {
  public:
    CongestionTable() = default;
    CongestionTable(int uplinks, DreParams params, double capacity_bps);

    int uplinks() const { return static_cast<int>(egress_.size()); }

    /// Throws LookupError for a port outside [0, uplinks).
    CongestionEntry read_entry(int port, Direction dir) const;

    /// Marks the physical link on `port` (both directions) up or down.
    void set_failed(int port, bool failed);
    bool is_failed(int port) const;

    DreRegister& dre(int port, Direction dir);
    const DreRegister& dre(int port, Direction dir) const;

    /// Entries for every uplink in port order.
    std::vector<CongestionEntry> read_all(Direction dir) const;

  private:
    void check(int port) const;

    std::vector<DreRegister> egress_;
    std::vector<DreRegister> ingress_;
    std::vector<bool> failed_;
};

/// Worst (largest) metric over a set of hops; kFailedMetric if any is failed.
int worst_metric(std::span<const CongestionEntry> hops);

/// Link-by-link min-max selection: for each index i the combined metric is
/// max(a[i], b[i]); returns the index with the smallest combined metric,
/// lowest index on ties. Indices with a failed entry on either side, or for
/// which `excluded` returns true, are never chosen. nullopt if none viable.
template <typename Excluded>
std::optional<int> select_min_max(std::span<const CongestionEntry> a, std::span<const CongestionEntry> b,
                                  Excluded&& excluded) {
    std::optional<int> best;
    int best_metric = kFailedMetric;
    const std::size_t n = a.size() < b.size() ? a.size() : b.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int idx = static_cast<int>(i);
        if (a[i].failed || b[i].failed || excluded(idx)) continue;
        const int m = a[i].load > b[i].load ? a[i].load : b[i].load;
        if (!best || m < best_metric) {
            best = idx;
            best_metric = m;
        }
    }
    return best;
}

inline std::optional<int> select_min_max(std::span<const CongestionEntry> a, std::span<const CongestionEntry> b) {
    return select_min_max(a, b, [](int) { return false; });
}

}  // namespace caft
