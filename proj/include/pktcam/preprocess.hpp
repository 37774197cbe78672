#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pktcam/dissect.hpp"

namespace pktcam {

/// Model input length in bytes.
inline constexpr std::size_t kVectorLen = 1500;
/// UDP headers are zero-padded to the length of a TCP header without options.
inline constexpr std::size_t kTransportPadLen = 20;

/// Where a feature-vector position came from.
struct Origin {
    enum class Kind : std::uint8_t { Offset, ZeroPad, MaskedIP };
    Kind kind = Kind::ZeroPad;
    /// Record offset for Offset and MaskedIP; unused for ZeroPad.
    std::uint32_t offset = 0;

    bool operator==(const Origin&) const = default;
};

struct FeatureVector {
    std::array<std::uint8_t, kVectorLen> bytes{};
    std::size_t valid_len = 0;
    std::array<Origin, kVectorLen> origin{};
    std::array<float, kVectorLen> normalized{};
};

enum class SkipReason { NoPayloadControl, NonIp, UnsupportedLinkType };

const char* to_string(SkipReason reason) noexcept;
std::optional<SkipReason> skip_reason_from_string(std::string_view s);

/// Display label for packets that never reach the model.
inline constexpr const char* kNoneLabel = "None";

std::optional<SkipReason> should_skip(const DecodedPacket& pkt);

/**
 * Lay a packet out as the fixed model input:
 *   IP header (addresses zeroed) ++ transport header (UDP padded to 20) ++ payload,
 * truncated or zero-filled to 1500 bytes. The Ethernet header and any link
 * trailer are dropped. `data` must be the record bytes `pkt` was dissected from.
 *
 * Precondition: should_skip(pkt) is empty. The result is already normalized.
 */
FeatureVector vectorize(const DecodedPacket& pkt, ByteView data);

/// normalized[i] = bytes[i] / 255.
void normalize(FeatureVector& v);

using PreprocessOutcome = std::variant<FeatureVector, SkipReason>;

PreprocessOutcome preprocess(const DecodedPacket& pkt, ByteView data);

} // namespace pktcam
