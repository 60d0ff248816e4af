#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "caft/sim_time.hpp"
#include "caft/topology.hpp"

namespace caft {

/// Empirical flow-size distribution: piecewise linear CDF over
/// (size_bytes, cumulative probability) points.
class SizeCdf {
  public:
    struct Point {
        double size_bytes;
        double prob;
    };

    /// Validates: at least one point, strictly increasing sizes, probabilities
    /// in [0,1], nondecreasing and ending at 1. Throws ParseError.
    explicit SizeCdf(std::vector<Point> points);

    /// File format: one "size_bytes cumulative_prob" pair per line,
    /// whitespace separated; '#' starts a comment; blank lines ignored.
    /// Errors carry the source name and line number.
    static SizeCdf parse(std::istream& in, const std::string& source = "<stream>");
    static SizeCdf load(const std::filesystem::path& path);

    /// Inverse CDF for u in [0,1): linear interpolation in size between the
    /// bracketing points; mass at the first point for u below its probability.
    double quantile(double u) const;

    /// Mean of the piecewise-linear distribution.
    double mean() const;

    /// CDF value at `size` (linear between points).
    double cdf(double size) const;

    const std::vector<Point>& points() const { return points_; }

  private:
    std::vector<Point> points_;
};

struct WorkloadSpec {
    /// Offered load as a fraction of the core bisection bandwidth.
    double load = 0.6;
    std::size_t flow_count = 9000;
    SizeCdf sizes;
};

struct FlowSpec {
    std::uint64_t id;
    SimTime arrival;
    HostId src_host;
    HostId dst_host;
    std::uint64_t size_bytes;
};

/// Poisson arrival rate (flows/s) that offers `load` of the core bisection:
/// load * bisection_bps / (mean_size_bytes * 8).
double arrival_rate_for_load(const FatTree& topo, double load, double mean_size_bytes);

/// Exponential inter-arrivals, inverse-CDF sizes rounded up to whole bytes
/// (minimum 1), sources uniform over hosts and destinations uniform over
/// hosts in other pods. Deterministic per seed.
std::vector<FlowSpec> generate(const FatTree& topo, const WorkloadSpec& spec, std::uint64_t seed);

}  // namespace caft
