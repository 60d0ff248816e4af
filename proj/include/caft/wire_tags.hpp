#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caft/congestion.hpp"

namespace caft {

inline constexpr std::uint16_t kCaftTpid = 0x88B5;
inline constexpr std::uint16_t kExpeditusTpid = 0x88B6;
inline constexpr std::size_t kMaxCongestionMetrics = 127;

enum class TripFlag : std::uint8_t { outbound = 0, inbound = 1 };

/// Path-allocation tag. Wire layout, MSB first:
///
///   | TPID (16) | TF (1) | NoC (7) | CM[0] (4) | CM[1] (4) | ... | pad |
///
/// NoC is the length of `cm`; the trailing nibble is zero when NoC is odd.
struct PathTag {
    std::uint16_t tpid = kCaftTpid;
    TripFlag tf = TripFlag::outbound;
    std::vector<CongestionEntry> cm;

    friend bool operator==(const PathTag&, const PathTag&) = default;
};

enum class TagField : std::uint8_t { tpid, tf_noc, noc, cm };

class TagError : public std::runtime_error {
  public:
    TagError(TagField field, const std::string& what) : std::runtime_error(what), field_(field) {}
    TagField field() const { return field_; }

  private:
    TagField field_;
};

/// ceil((24 + 4 * noc) / 8)
constexpr std::size_t encoded_size(std::size_t noc) { return (24 + 4 * noc + 7) / 8; }

/// Throws TagError(noc) when more than 127 metrics are carried.
std::vector<std::uint8_t> encode(const PathTag& tag);

/// Parses a tag from the front of `bytes`; trailing bytes are ignored.
/// Throws TagError naming the offending field on short input, a TPID other
/// than `expected_tpid`, or a NoC larger than the remaining input ("cm underrun").
PathTag decode(std::span<const std::uint8_t> bytes, std::uint16_t expected_tpid = kCaftTpid);

}  // namespace caft
