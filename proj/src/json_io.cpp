#include "pktcam/json_io.hpp"

#include <cstdio>

namespace pktcam {

namespace {

Json metrics_json(const nn::AggregateMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

std::string layer_of(const std::string& field) { return field.substr(0, field.find('.')); }

const char* layer_label(const std::string& layer) {
    if (layer == "eth") return "Ethernet II";
    if (layer == "vlan") return "802.1Q VLAN";
    if (layer == "ip") return "Internet Protocol Version 4";
    if (layer == "ipv6") return "Internet Protocol Version 6";
    if (layer == "tcp") return "Transmission Control Protocol";
    if (layer == "udp") return "User Datagram Protocol";
    return "Other";
}

std::string rgb_hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

} // namespace

Json to_json(const nn::EvalReport& report, const std::vector<std::string>& class_names) {
    Json per_class = Json::array();
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& m = report.per_class[c];
        per_class.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support}});
    }
    return {{"per_class", per_class},     {"macro", metrics_json(report.macro)},
            {"weighted", metrics_json(report.weighted)}, {"accuracy", report.accuracy},
            {"confusion", report.confusion}, {"total", report.total}};
}

Json details_tree(const DecodedPacket& pkt) {
    Json out = Json::array();
    Json* current = nullptr;
    std::string current_layer;
    for (const auto& f : pkt.field_spans) {
        const std::string layer = layer_of(f.name);
        if (!current || layer != current_layer) {
            out.push_back({{"layer", layer}, {"label", layer_label(layer)}, {"begin", f.range.begin},
                           {"end", f.range.end}, {"fields", Json::array()}});
            current = &out.back();
            current_layer = layer;
        }
        (*current)["begin"] = std::min((*current)["begin"].get<std::size_t>(), f.range.begin);
        (*current)["end"] = std::max((*current)["end"].get<std::size_t>(), f.range.end);
        (*current)["fields"].push_back(
            {{"name", f.name}, {"label", field_group_label(f.name)}, {"begin", f.range.begin}, {"end", f.range.end},
             {"value", f.value}});
    }
    if (!pkt.payload_span.empty()) {
        out.push_back({{"layer", "payload"}, {"label", "Payload"}, {"begin", pkt.payload_span.begin},
                       {"end", pkt.payload_span.end}, {"fields", Json::array()}});
    }
    if (!pkt.trailer_span.empty()) {
        out.push_back({{"layer", "trailer"}, {"label", "Link-layer padding"}, {"begin", pkt.trailer_span.begin},
                       {"end", pkt.trailer_span.end}, {"fields", Json::array()}});
    }
    return out;
}

Json to_json(const PacketEntry& e) {
    auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
    return {{"id", e.id},
            {"capture_id", e.capture_id},
            {"record_index", e.record_index},
            {"timestamp_ns", e.timestamp_ns},
            {"src_ip", e.src_ip},
            {"dst_ip", e.dst_ip},
            {"src_port", opt(e.src_port)},
            {"dst_port", opt(e.dst_port)},
            {"protocol", e.protocol},
            {"payload_size", e.payload_size},
            {"direction", to_string(e.direction)},
            {"packet_type", e.packet_type},
            {"skip_reason", opt(e.skip_reason)},
            {"predicted_class", opt(e.predicted_class)},
            {"probability", opt(e.probability)},
            {"model_id", opt(e.model_id)},
            {"has_cam", e.has_cam}};
}

Json to_json(const ImpactRange& r) {
    return {{"begin", r.begin}, {"end", r.end}, {"label", r.label}, {"fields", r.fields}, {"relevance", r.relevance}};
}

Json to_json(const ClassPattern& p) {
    Json ranges = Json::array();
    for (const auto& r : p.top_ranges) ranges.push_back(to_json(r));
    return {{"class", p.class_name},
            {"class_id", p.class_id},
            {"sample_count", p.sample_count},
            {"min_prob", p.confidence_threshold},
            {"max_count", p.max_count},
            {"mean_cam", p.mean_cam},
            {"top_ranges", ranges}};
}

Json cam_payload(const Cam& cam, Colormap map) {
    const CamGrid grid = trim_and_grid(cam, cam.valid_len);
    Json colors = Json::array();
    for (const Rgb& c : colorize(cam, map)) colors.push_back(rgb_hex(c));
    return {{"class_id", cam.class_id},
            {"valid_len", cam.valid_len},
            {"abs", cam.values},
            {"rel", cam.rel},
            {"grid_dims", {{"rows", kCamRows}, {"cols", kCamCols}, {"display_rows", grid.rows.size()}}},
            {"colormap", to_string(map)},
            {"colors", colors}};
}

std::string hex_string(ByteView bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) out.push_back(' ');
        out.push_back(kDigits[bytes[i] >> 4]);
        out.push_back(kDigits[bytes[i] & 0xF]);
    }
    return out;
}

} // namespace pktcam
