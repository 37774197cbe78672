#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pktcam {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class ByteOrder { Little, Big };

inline std::uint16_t load_be16(ByteView b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

inline std::uint32_t load_be32(ByteView b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

inline std::uint16_t load16(ByteView b, std::size_t at, ByteOrder order) {
    if (order == ByteOrder::Big) return load_be16(b, at);
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

inline std::uint32_t load32(ByteView b, std::size_t at, ByteOrder order) {
    if (order == ByteOrder::Big) return load_be32(b, at);
    return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
           (std::uint32_t{b[at + 3]} << 24);
}

inline void store16(Bytes& out, std::uint16_t v, ByteOrder order) {
    if (order == ByteOrder::Big) {
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v));
    } else {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }
}

inline void store32(Bytes& out, std::uint32_t v, ByteOrder order) {
    if (order == ByteOrder::Big) {
        for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
    } else {
        for (int shift = 0; shift <= 24; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

} // namespace pktcam
