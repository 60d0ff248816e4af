#include "caft/wire_tags.hpp"

#include <fmt/format.h>

namespace caft {

std::vector<std::uint8_t> encode(const PathTag& tag) {
    const std::size_t noc = tag.cm.size();
    if (noc > kMaxCongestionMetrics)
        throw TagError(TagField::noc, fmt::format("NoC {} exceeds the 7-bit limit of {}", noc, kMaxCongestionMetrics));

    std::vector<std::uint8_t> out(encoded_size(noc), 0);
    out[0] = static_cast<std::uint8_t>(tag.tpid >> 8);
    out[1] = static_cast<std::uint8_t>(tag.tpid & 0xff);
    out[2] = static_cast<std::uint8_t>((static_cast<unsigned>(tag.tf) << 7) | noc);
    for (std::size_t i = 0; i < noc; ++i) {
        const std::uint8_t nib = tag.cm[i].to_nibble();
        out[3 + i / 2] |= (i % 2 == 0) ? static_cast<std::uint8_t>(nib << 4) : nib;
    }
    return out;
}

PathTag decode(std::span<const std::uint8_t> bytes, std::uint16_t expected_tpid) {
    if (bytes.size() < 2) throw TagError(TagField::tpid, "tag shorter than the TPID field");
    PathTag tag;
    tag.tpid = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
    if (tag.tpid != expected_tpid)
        throw TagError(TagField::tpid, fmt::format("unexpected TPID {:#06x} (want {:#06x})", tag.tpid, expected_tpid));
    if (bytes.size() < 3) throw TagError(TagField::tf_noc, "tag truncated before TF/NoC byte");
    tag.tf = static_cast<TripFlag>(bytes[2] >> 7);
    const std::size_t noc = bytes[2] & 0x7f;
    if (bytes.size() < encoded_size(noc))
        throw TagError(TagField::cm, fmt::format("cm underrun: NoC {} needs {} bytes, have {}", noc,
                                                 encoded_size(noc), bytes.size()));
    tag.cm.reserve(noc);
    for (std::size_t i = 0; i < noc; ++i) {
        const std::uint8_t byte = bytes[3 + i / 2];
        tag.cm.push_back(CongestionEntry::from_nibble(i % 2 == 0 ? byte >> 4 : byte & 0x0f));
    }
    return tag;
}

}  // namespace caft
