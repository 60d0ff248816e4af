#include "caft/congestion.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "caft/errors.hpp"

namespace caft {

DreRegister::DreRegister(DreParams params, double capacity_bps) : params_(params), capacity_(capacity_bps) {}

double DreRegister::utilization() const {
    return (x_ * params_.alpha * 8.0) / (params_.t_dre_s * capacity_);
}

std::uint8_t DreRegister::quantize() const {
    const double u = utilization();
    if (!(u > 0)) return 0;
    return static_cast<std::uint8_t>(std::min(7.0, std::floor(u * 8.0)));
}

CongestionTable::CongestionTable(int uplinks, DreParams params, double capacity_bps)
    : egress_(static_cast<std::size_t>(uplinks), DreRegister(params, capacity_bps)),
      ingress_(static_cast<std::size_t>(uplinks), DreRegister(params, capacity_bps)),
      failed_(static_cast<std::size_t>(uplinks), false) {}

void CongestionTable::check(int port) const {
    if (port < 0 || port >= uplinks())
        throw LookupError(fmt::format("port {} is not an uplink (table covers {} ports)", port, uplinks()));
}

CongestionEntry CongestionTable::read_entry(int port, Direction dir) const {
    check(port);
    if (failed_[static_cast<std::size_t>(port)]) return CongestionEntry::failed_marker();
    return {false, dre(port, dir).quantize()};
}

void CongestionTable::set_failed(int port, bool failed) {
    check(port);
    failed_[static_cast<std::size_t>(port)] = failed;
}

bool CongestionTable::is_failed(int port) const {
    check(port);
    return failed_[static_cast<std::size_t>(port)];
}

DreRegister& CongestionTable::dre(int port, Direction dir) {
    check(port);
    return dir == Direction::egress ? egress_[static_cast<std::size_t>(port)] : ingress_[static_cast<std::size_t>(port)];
}

const DreRegister& CongestionTable::dre(int port, Direction dir) const {
    check(port);
    return dir == Direction::egress ? egress_[static_cast<std::size_t>(port)] : ingress_[static_cast<std::size_t>(port)];
}

std::vector<CongestionEntry> CongestionTable::read_all(Direction dir) const {
    std::vector<CongestionEntry> out;
    out.reserve(egress_.size());
    for (int p = 0; p < uplinks(); ++p) out.push_back(read_entry(p, dir));
    return out;
}

int worst_metric(std::span<const CongestionEntry> hops) {
    int worst = 0;
    for (const auto& h : hops) worst = std::max(worst, h.metric());
    return worst;
}

}  // namespace caft
