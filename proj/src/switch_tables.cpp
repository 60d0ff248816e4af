#include "caft/switch_tables.hpp"

#include <array>

#include <fmt/format.h>

#include "caft/errors.hpp"

namespace caft {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t flow_hash(const FiveTuple& t, std::uint64_t seed) {
    const std::array<std::uint8_t, 13> bytes{
        static_cast<std::uint8_t>(t.src_ip >> 24),   static_cast<std::uint8_t>(t.src_ip >> 16),
        static_cast<std::uint8_t>(t.src_ip >> 8),    static_cast<std::uint8_t>(t.src_ip),
        static_cast<std::uint8_t>(t.dst_ip >> 24),   static_cast<std::uint8_t>(t.dst_ip >> 16),
        static_cast<std::uint8_t>(t.dst_ip >> 8),    static_cast<std::uint8_t>(t.dst_ip),
        static_cast<std::uint8_t>(t.src_port >> 8),  static_cast<std::uint8_t>(t.src_port),
        static_cast<std::uint8_t>(t.dst_port >> 8),  static_cast<std::uint8_t>(t.dst_port),
        t.protocol,
    };
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

PathAllocationTable::PathAllocationTable(std::size_t size, std::uint64_t seed) : size_(size), seed_(seed) {
    if (size_ == 0) throw ConfigError("path allocation table size must be positive");
}

std::size_t PathAllocationTable::slot_index(const FiveTuple& key) const {
    return static_cast<std::size_t>(flow_hash(key, seed_) % size_);
}

std::optional<int> PathAllocationTable::lookup(const FiveTuple& key) {
    auto it = slots_.find(slot_index(key));
    if (it == slots_.end() || !(it->second.key == key) || !it->second.valid) return std::nullopt;
    it->second.age = false;
    return it->second.outport;
}

void PathAllocationTable::insert(const FiveTuple& key, int outport, bool valid) {
    slots_[slot_index(key)] = PatEntry{key, outport, valid, false};
}

void PathAllocationTable::confirm(const FiveTuple& key, int outport) { insert(key, outport, true); }

void PathAllocationTable::sweep() {
    for (auto it = slots_.begin(); it != slots_.end();) {
        auto& e = it->second;
        if (!e.valid && e.age) {
            // Invalid and already swept once; an empty slot behaves identically.
            it = slots_.erase(it);
            continue;
        }
        if (e.age)
            e.valid = false;
        else
            e.age = true;
        ++it;
    }
}

std::optional<PatEntry> PathAllocationTable::slot_for(const FiveTuple& key) const {
    auto it = slots_.find(slot_index(key));
    if (it == slots_.end()) return std::nullopt;
    return it->second;
}

FailureTable::FailureTable(int pods, int own_pod, int ports)
    : rows_(static_cast<std::size_t>(pods), 0), own_pod_(own_pod), ports_(ports) {
    if (ports > 64) throw ConfigError(fmt::format("failure table rows hold at most 64 ports (got {})", ports));
}

void FailureTable::check(int pod, int port) const {
    if (pod < 0 || pod >= pods()) throw LookupError(fmt::format("pod {} out of range [0,{})", pod, pods()));
    if (pod == own_pod_) throw LookupError(fmt::format("failure table has no row for its own pod {}", pod));
    if (port < 0 || port >= ports_) throw LookupError(fmt::format("port {} out of range [0,{})", port, ports_));
}

bool FailureTable::record(int pod, int port, bool failed) {
    check(pod, port);
    auto& row = rows_[static_cast<std::size_t>(pod)];
    const std::uint64_t bit = std::uint64_t{1} << port;
    const std::uint64_t before = row;
    row = failed ? (row | bit) : (row & ~bit);
    return row != before;
}

bool FailureTable::is_failed(int pod, int port) const {
    check(pod, port);
    return (rows_[static_cast<std::size_t>(pod)] >> port) & 1u;
}

std::uint64_t FailureTable::row(int pod) const {
    check(pod, 0);
    return rows_[static_cast<std::size_t>(pod)];
}

}  // namespace caft
