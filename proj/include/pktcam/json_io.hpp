#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pktcam/cam.hpp"
#include "pktcam/dissect.hpp"
#include "pktcam/nn/metrics.hpp"
#include "pktcam/store.hpp"

namespace pktcam {

using Json = nlohmann::json;

/// Per-class rows keyed by name, macro and weighted averages, accuracy and the confusion matrix.
Json to_json(const nn::EvalReport& report, const std::vector<std::string>& class_names);

/**
 * Nested protocol units for the details view:
 *   [{layer, label, begin, end, fields: [{name, begin, end, value}]}, ...]
 * followed by payload and trailer nodes when present. Offsets are record offsets.
 */
Json details_tree(const DecodedPacket& pkt);

Json to_json(const PacketEntry& entry);
Json to_json(const ImpactRange& range);
Json to_json(const ClassPattern& pattern);

/// CAM payload: absolute and relative values, grid dimensions and one colour per displayed cell.
Json cam_payload(const Cam& cam, Colormap map);

std::string hex_string(ByteView bytes);

} // namespace pktcam
