#include "caft/workload.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "caft/errors.hpp"

namespace caft {

SizeCdf::SizeCdf(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw ParseError("size CDF has no points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (!(p.prob >= 0.0 && p.prob <= 1.0))
            throw ParseError(fmt::format("point {}: probability {} outside [0,1]", i + 1, p.prob));
        if (!(p.size_bytes >= 0.0)) throw ParseError(fmt::format("point {}: negative size", i + 1));
        if (i > 0 && !(p.size_bytes > points_[i - 1].size_bytes))
            throw ParseError(fmt::format("point {}: sizes must be strictly increasing", i + 1));
        if (i > 0 && p.prob < points_[i - 1].prob)
            throw ParseError(fmt::format("point {}: probabilities must be nondecreasing", i + 1));
    }
    if (points_.back().prob != 1.0)
        throw ParseError(fmt::format("final cumulative probability is {}, expected 1.0", points_.back().prob));
}

SizeCdf SizeCdf::parse(std::istream& in, const std::string& source) {
    std::vector<Point> points;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double size, prob;
        if (!(ls >> size)) continue;
        std::string extra;
        if (!(ls >> prob) || (ls >> extra))
            throw ParseError(fmt::format("{}:{}: expected 'size_bytes cumulative_prob'", source, lineno));
        if (!points.empty()) {
            if (!(size > points.back().size_bytes))
                throw ParseError(fmt::format("{}:{}: sizes must be strictly increasing", source, lineno));
            if (prob < points.back().prob)
                throw ParseError(fmt::format("{}:{}: probabilities must be nondecreasing", source, lineno));
        }
        if (!(prob >= 0.0 && prob <= 1.0))
            throw ParseError(fmt::format("{}:{}: probability {} outside [0,1]", source, lineno, prob));
        points.push_back({size, prob});
    }
    if (points.empty()) throw ParseError(fmt::format("{}: no data lines", source));
    if (points.back().prob != 1.0)
        throw ParseError(fmt::format("{}:{}: final cumulative probability is {}, expected 1.0", source, lineno,
                                     points.back().prob));
    return SizeCdf(std::move(points));
}

SizeCdf SizeCdf::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(fmt::format("cannot open size CDF '{}'", path.string()));
    return parse(in, path.string());
}

double SizeCdf::quantile(double u) const {
    if (u <= points_.front().prob) return points_.front().size_bytes;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const auto& a = points_[i - 1];
        const auto& b = points_[i];
        if (u <= b.prob) {
            if (b.prob == a.prob) return b.size_bytes;
            return a.size_bytes + (u - a.prob) / (b.prob - a.prob) * (b.size_bytes - a.size_bytes);
        }
    }
    return points_.back().size_bytes;
}

double SizeCdf::mean() const {
    double m = points_.front().prob * points_.front().size_bytes;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const auto& a = points_[i - 1];
        const auto& b = points_[i];
        m += (b.prob - a.prob) * 0.5 * (a.size_bytes + b.size_bytes);
    }
    return m;
}

double SizeCdf::cdf(double size) const {
    if (size < points_.front().size_bytes) return 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const auto& a = points_[i - 1];
        const auto& b = points_[i];
        if (size < b.size_bytes) return a.prob + (size - a.size_bytes) / (b.size_bytes - a.size_bytes) * (b.prob - a.prob);
    }
    return 1.0;
}

double arrival_rate_for_load(const FatTree& topo, double load, double mean_size_bytes) {
    return load * topo.core_bisection_bps() / (mean_size_bytes * 8.0);
}

std::vector<FlowSpec> generate(const FatTree& topo, const WorkloadSpec& spec, std::uint64_t seed) {
    if (!(spec.load > 0)) throw ConfigError("workload load must be positive");
    const double lambda = arrival_rate_for_load(topo, spec.load, spec.sizes.mean());

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(lambda);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto hosts = static_cast<std::uint64_t>(topo.host_count());
    const auto per_pod = hosts / static_cast<std::uint64_t>(topo.pods());
    std::uniform_int_distribution<std::uint64_t> pick_src(0, hosts - 1);
    std::uniform_int_distribution<std::uint64_t> pick_dst(0, hosts - per_pod - 1);

    std::vector<FlowSpec> flows;
    flows.reserve(spec.flow_count);
    double t = 0.0;
    for (std::size_t i = 0; i < spec.flow_count; ++i) {
        t += gap(rng);
        const auto src = pick_src(rng);
        // Skip over the source pod's block of host ids.
        auto dst = pick_dst(rng);
        const auto src_pod_start = (src / per_pod) * per_pod;
        if (dst >= src_pod_start) dst += per_pod;
        const double size = std::ceil(spec.sizes.quantile(unit(rng)));
        flows.push_back({i, from_seconds(t), static_cast<HostId>(src), static_cast<HostId>(dst),
                         static_cast<std::uint64_t>(std::max(1.0, size))});
    }
    return flows;
}

}  // namespace caft
