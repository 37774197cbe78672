#include "pktcam/classify.hpp"

#include <algorithm>

#include "pktcam/error.hpp"
#include "pktcam/parallel.hpp"

namespace pktcam {

PacketResult classify_packet(const nn::CnnModel<float>& model, const DecodedPacket& pkt, ByteView data,
                             bool with_cam, std::atomic<std::uint64_t>* forward_calls) {
    PacketResult r;
    r.skip = should_skip(pkt);
    if (r.skip) return r;
    const FeatureVector v = vectorize(pkt, data);
    if (forward_calls) ++*forward_calls;
    const auto fwd = nn::forward(model, v);
    r.class_id = fwd.predicted();
    r.probability = fwd.probabilities[static_cast<std::size_t>(r.class_id)];
    if (with_cam) r.cam = explain(model, fwd, r.class_id, v.valid_len);
    return r;
}

int model_class_id(const nn::CnnModel<float>& model, const std::string& class_name) {
    const auto it = std::find(model.class_names.begin(), model.class_names.end(), class_name);
    if (it == model.class_names.end()) throw DataError("model has no class '" + class_name + "'");
    return static_cast<int>(it - model.class_names.begin());
}

ClassPattern capture_class_pattern(const nn::CnnModel<float>& model, const PcapFile& capture,
                                   const std::string& class_name, double min_prob, std::size_t max_count,
                                   double top_fraction) {
    const int cls = model_class_id(model, class_name);
    const auto& records = capture.records;
    std::vector<DecodedPacket> packets(records.size());
    std::vector<PacketResult> results(records.size());
    parallel_for(records.size(), [&](std::size_t i) {
        packets[i] = dissect(records[i], capture.header.linktype, i);
        results[i] = classify_packet(model, packets[i], records[i].data);
    });

    std::vector<CamSample> samples;
    std::optional<std::size_t> representative;
    for (std::size_t i = 0; i < records.size() && samples.size() < max_count; ++i) {
        const PacketResult& r = results[i];
        if (!r.classified() || r.class_id != cls || !(r.probability > min_prob)) continue;
        if (!representative) representative = i;
        samples.push_back({*r.cam, r.probability});
    }
    ClassPattern p = average_cam(samples, min_prob, max_count);
    p.class_name = class_name;
    p.top_ranges = map_impacting_bytes(p, packets[*representative], records[*representative].data, top_fraction);
    return p;
}

} // namespace pktcam
