#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pktcam/cam.hpp"
#include "pktcam/nn/model.hpp"
#include "pktcam/pcap.hpp"

namespace pktcam {

/// Outcome for one record: either a skip reason or a prediction with its CAM.
struct PacketResult {
    std::optional<SkipReason> skip;
    int class_id = -1;
    double probability = 0.0;
    std::optional<Cam> cam;

    bool classified() const noexcept { return !skip.has_value(); }
};

/// Skipped packets never reach the model. forward_calls, when given, counts forward passes.
PacketResult classify_packet(const nn::CnnModel<float>& model, const DecodedPacket& pkt, ByteView data,
                             bool with_cam = true, std::atomic<std::uint64_t>* forward_calls = nullptr);

/// Throws DataError when the model has no class of that name.
int model_class_id(const nn::CnnModel<float>& model, const std::string& class_name);

/**
 * Average-CAM report for one class over a capture: packets predicted as the
 * class with probability above min_prob, earliest first, at most max_count;
 * the top ranges are mapped onto the first contributing packet.
 * Throws EmptyPatternError when nothing qualifies.
 */
ClassPattern capture_class_pattern(const nn::CnnModel<float>& model, const PcapFile& capture,
                                   const std::string& class_name, double min_prob = kDefaultMinProbability,
                                   std::size_t max_count = kDefaultMaxCount, double top_fraction = kDefaultTopFraction);

} // namespace pktcam
