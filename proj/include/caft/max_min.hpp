#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace caft {

/// Max-min fair rates by progressive filling. `flow_links[f]` lists the
/// (distinct) link indices flow f traverses; every flow must traverse at
/// least one link. Links with zero capacity pin their flows at rate 0.
///
/// Filling runs in exact rational arithmetic; each returned rate is the
/// largest double not above the exact max-min rate, so the exact sum of the
/// returned rates on any link never exceeds its capacity.
std::vector<double> max_min_rates(std::span<const double> link_capacity,
                                  std::span<const std::span<const std::uint32_t>> flow_links);

/// Largest (allocated - capacity) over links carrying at least one flow,
/// with the allocation summed exactly. -inf when no link is used.
double max_link_excess(std::span<const double> link_capacity,
                       std::span<const std::span<const std::uint32_t>> flow_links, std::span<const double> rates);

}  // namespace caft
