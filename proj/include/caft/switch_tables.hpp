#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

namespace caft {

struct FiveTuple {
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t protocol = 6;

    FiveTuple swapped() const { return {dst_ip, src_ip, dst_port, src_port, protocol}; }

    friend bool operator==(const FiveTuple&, const FiveTuple&) = default;
};

/// Flow hash used by PAT indexing and ECMP: FNV-1a over the 13 canonical
/// header bytes (src_ip, dst_ip, src_port, dst_port big-endian, protocol),
/// seeded by xoring `seed` into the FNV offset basis, then passed through the
/// splitmix64 finalizer.
std::uint64_t flow_hash(const FiveTuple& t, std::uint64_t seed);

/// splitmix64 finalizer, also used to derive per-switch salts.
std::uint64_t mix64(std::uint64_t x);

struct FiveTupleHasher {
    std::size_t operator()(const FiveTuple& t) const { return static_cast<std::size_t>(flow_hash(t, 0)); }
};

struct PatEntry {
    FiveTuple key;
    int outport = 0;
    bool valid = false;
    bool age = false;
};

/// Direct-mapped flow -> outport table with one-bit aging. Slot index is
/// flow_hash(key, seed) mod size; a colliding insert overwrites the slot.
/// Only occupied slots are materialized.
class PathAllocationTable {
  public:
    static constexpr std::size_t kDefaultSize = 65536;

    explicit PathAllocationTable(std::size_t size = kDefaultSize, std::uint64_t seed = 0);

    /// Hit when the slot holds this key with valid=1; a hit clears the age bit.
    std::optional<int> lookup(const FiveTuple& key);

    /// Overwrites the slot; age starts at 0.
    void insert(const FiveTuple& key, int outport, bool valid);

    /// Creates or updates the slot with valid=1, age=0.
    void confirm(const FiveTuple& key, int outport);

    /// Two-phase aging, run once per timeout period: entries whose age bit is
    /// already set become invalid, the rest get their age bit set.
    void sweep();

    /// Raw slot contents for this key's slot, whatever key it holds.
    std::optional<PatEntry> slot_for(const FiveTuple& key) const;

    std::size_t size() const { return size_; }
    std::size_t occupied() const { return slots_.size(); }

  private:
    std::size_t slot_index(const FiveTuple& key) const;

    std::size_t size_;
    std::uint64_t seed_;
    std::unordered_map<std::size_t, PatEntry> slots_;
};

/// Remote aggregation-to-core failure bitmap held by an aggregation switch:
/// one row per pod, bit i of a row = uplink port i of the same-index
/// aggregation switch in that pod (1 = failed).
class FailureTable {
  public:
    FailureTable() = default;
    /// Throws ConfigError when the row width exceeds 64 bits.
    FailureTable(int pods, int own_pod, int ports);

    /// Returns true if the stored bit changed. Throws LookupError for the own
    /// pod or an out-of-range pod/port.
    bool record(int pod, int port, bool failed);
    bool is_failed(int pod, int port) const;
    std::uint64_t row(int pod) const;

    int pods() const { return static_cast<int>(rows_.size()); }
    int ports() const { return ports_; }
    int own_pod() const { return own_pod_; }

  private:
    void check(int pod, int port) const;

    std::vector<std::uint64_t> rows_;
    int own_pod_ = -1;
    int ports_ = 0;
};

}  // namespace caft
