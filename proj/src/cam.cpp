#include "pktcam/cam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pktcam/error.hpp"

namespace pktcam {

double Cam::mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<double> relative_scale(std::span<const double> values) {
    std::vector<double> rel(values.size(), 0.5);
    if (values.empty()) return rel;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return rel;
    for (std::size_t i = 0; i < values.size(); ++i) rel[i] = (values[i] - *lo) / range;
    return rel;
}

template <class T>
Cam compute_cam(const nn::Tensor<T>& maps, std::span<const T> weights_row, int class_id, std::size_t valid_len) {
    if (static_cast<std::size_t>(maps.rows()) != weights_row.size()) {
        throw ShapeError("CAM weight row has " + std::to_string(weights_row.size()) + " entries for " +
                         std::to_string(maps.rows()) + " feature maps");
    }
    Cam cam;
    cam.class_id = class_id;
    cam.valid_len = std::min<std::size_t>(valid_len, static_cast<std::size_t>(maps.cols()));
    cam.values.assign(static_cast<std::size_t>(maps.cols()), 0.0);
    for (Eigen::Index k = 0; k < maps.rows(); ++k) {
        const double w = static_cast<double>(weights_row[static_cast<std::size_t>(k)]);
        const T* row = maps.row(k).data();
        for (Eigen::Index x = 0; x < maps.cols(); ++x) cam.values[static_cast<std::size_t>(x)] += w * static_cast<double>(row[x]);
    }
    cam.rel = relative_scale(cam.values);
    return cam;
}

template <class T>
Cam explain(const nn::CnnModel<T>& model, const nn::ForwardResult<T>& fwd, int class_id, std::size_t valid_len) {
    if (class_id < 0 || class_id >= model.config.num_classes) throw ShapeError("class id out of range");
    const auto& w = model.params.dense.weights;
    const std::span<const T> row(w.data() + static_cast<Eigen::Index>(class_id) * w.cols(),
                                 static_cast<std::size_t>(w.cols()));
    return compute_cam<T>(fwd.last_feature_maps, row, class_id, valid_len);
}

template Cam compute_cam<float>(const nn::Tensor<float>&, std::span<const float>, int, std::size_t);
template Cam compute_cam<double>(const nn::Tensor<double>&, std::span<const double>, int, std::size_t);
template Cam explain<float>(const nn::CnnModel<float>&, const nn::ForwardResult<float>&, int, std::size_t);
template Cam explain<double>(const nn::CnnModel<double>&, const nn::ForwardResult<double>&, int, std::size_t);

CamGrid trim_and_grid(const Cam& cam, std::size_t valid_len) {
    CamGrid grid;
    grid.valid_len = std::min(valid_len, cam.values.size());
    for (std::size_t start = 0; start < grid.valid_len; start += kCamCols) {
        const std::size_t end = std::min(grid.valid_len, start + kCamCols);
        grid.rows.emplace_back(cam.values.begin() + static_cast<std::ptrdiff_t>(start),
                               cam.values.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return grid;
}

std::optional<Colormap> parse_colormap(std::string_view name) {
    if (name == "jet") return Colormap::Jet;
    if (name == "bwr") return Colormap::Bwr;
    return std::nullopt;
}

const char* to_string(Colormap map) noexcept { return map == Colormap::Jet ? "jet" : "bwr"; }

namespace {

struct Knot {
    double x;
    double y;
};

double interpolate(std::span<const Knot> knots, double t) {
    if (t <= knots.front().x) return knots.front().y;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (t <= knots[i].x) {
            const Knot& a = knots[i - 1];
            const Knot& b = knots[i];
            return a.y + (b.y - a.y) * (t - a.x) / (b.x - a.x);
        }
    }
    return knots.back().y;
}

// Segment tables of matplotlib's "jet" and "bwr".
constexpr Knot kJetRed[] = {{0.0, 0.0}, {0.35, 0.0}, {0.66, 1.0}, {0.89, 1.0}, {1.0, 0.5}};
constexpr Knot kJetGreen[] = {{0.0, 0.0}, {0.125, 0.0}, {0.375, 1.0}, {0.64, 1.0}, {0.91, 0.0}, {1.0, 0.0}};
constexpr Knot kJetBlue[] = {{0.0, 0.5}, {0.11, 1.0}, {0.34, 1.0}, {0.65, 0.0}, {1.0, 0.0}};
constexpr Knot kBwrRed[] = {{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}};
constexpr Knot kBwrGreen[] = {{0.0, 0.0}, {0.5, 1.0}, {1.0, 0.0}};
constexpr Knot kBwrBlue[] = {{0.0, 1.0}, {0.5, 1.0}, {1.0, 0.0}};

std::uint8_t channel(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

} // namespace

Rgb colormap_rgb(double t, Colormap map) {
    t = std::isnan(t) ? 0.0 : std::clamp(t, 0.0, 1.0);
    if (map == Colormap::Jet) {
        return {channel(interpolate(kJetRed, t)), channel(interpolate(kJetGreen, t)), channel(interpolate(kJetBlue, t))};
    }
    return {channel(interpolate(kBwrRed, t)), channel(interpolate(kBwrGreen, t)), channel(interpolate(kBwrBlue, t))};
}

double bwr_position(double value, double peak) { return peak > 0.0 ? 0.5 + 0.5 * value / peak : 0.5; }

std::vector<Rgb> colorize(const Cam& cam, Colormap map) {
    std::vector<Rgb> out;
    if (map == Colormap::Jet) {
        const std::size_t n = std::min(cam.valid_len, cam.rel.size());
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(colormap_rgb(cam.rel[i], map));
        return out;
    }
    // Divergent: white is zero, so evidence against the class stays blue.
    const std::size_t n = std::min(cam.valid_len, cam.values.size());
    double peak = 0.0;
    for (double v : cam.values) peak = std::max(peak, std::abs(v));
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(colormap_rgb(bwr_position(cam.values[i], peak), map));
    return out;
}

ClassPattern average_cam(std::span<const CamSample> samples, double min_prob, std::size_t max_count) {
    ClassPattern pattern;
    pattern.confidence_threshold = min_prob;
    pattern.max_count = max_count;
    bool first = true;
    for (const auto& s : samples) {
        if (pattern.sample_count >= max_count) break;
        if (!(s.probability > min_prob)) continue;
        if (first) {
            pattern.class_id = s.cam.class_id;
            pattern.mean_cam.assign(s.cam.values.size(), 0.0);
            first = false;
        } else if (s.cam.class_id != pattern.class_id) {
            throw DataError("average_cam needs CAMs of a single class");
        } else if (s.cam.values.size() != pattern.mean_cam.size()) {
            throw ShapeError("CAMs differ in length");
        }
        for (std::size_t i = 0; i < pattern.mean_cam.size(); ++i) pattern.mean_cam[i] += s.cam.values[i];
        ++pattern.sample_count;
    }
    if (pattern.sample_count == 0) {
        throw EmptyPatternError("no CAM with prediction probability above " + std::to_string(min_prob));
    }
    for (double& v : pattern.mean_cam) v /= static_cast<double>(pattern.sample_count);
    return pattern;
}

std::vector<std::string> position_fields(const DecodedPacket& pkt, const FeatureVector& v, std::size_t position) {
    const Origin& o = v.origin[position];
    if (o.kind == Origin::Kind::ZeroPad) {
        return {position < v.valid_len ? "transport padding" : "zero padding"};
    }
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::vector<std::string> names;
    for (const auto& f : pkt.field_spans) {
        if (!f.range.contains(o.offset)) continue;
        if (f.range.size() < best) {
            best = f.range.size();
            names.clear();
        }
        if (f.range.size() == best) names.push_back(f.name);
    }
    if (!names.empty()) return names;
    if (pkt.payload_span.contains(o.offset)) return {"payload"};
    return {"unknown"};
}

namespace {

std::string label_for(const std::string& field) {
    if (field == "payload") return "payload bytes";
    if (field == "transport padding" || field == "zero padding" || field == "unknown") return field;
    return field_group_label(field);
}

} // namespace

std::vector<ImpactRange> map_impacting_bytes(const ClassPattern& pattern, const DecodedPacket& representative,
                                             ByteView representative_data, double top_fraction) {
    if (should_skip(representative)) throw DataError("representative packet does not enter the model");
    const FeatureVector v = vectorize(representative, representative_data);
    const std::size_t limit = std::min(v.valid_len, pattern.mean_cam.size());
    const std::vector<double> rel = relative_scale(pattern.mean_cam);

    const auto [lo, hi] = std::minmax_element(pattern.mean_cam.begin(), pattern.mean_cam.end());
    const bool constant = pattern.mean_cam.empty() || !(*hi - *lo > 0.0);
    const double threshold = 1.0 - top_fraction;
    auto impacting = [&](std::size_t i) { return constant || rel[i] >= threshold; };

    std::vector<ImpactRange> ranges;
    for (std::size_t i = 0; i < limit;) {
        if (!impacting(i)) { ++i; continue; }
        ImpactRange r;
        r.begin = i;
        double sum = 0.0;
        std::vector<std::string> labels;
        while (i < limit && impacting(i)) {
            sum += rel[i];
            for (const auto& f : position_fields(representative, v, i)) {
                if (std::find(r.fields.begin(), r.fields.end(), f) == r.fields.end()) r.fields.push_back(f);
                const std::string l = label_for(f);
                if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
            }
            ++i;
        }
        r.end = i;
        r.relevance = sum / static_cast<double>(r.end - r.begin);
        for (std::size_t k = 0; k < labels.size(); ++k) r.label += (k ? ", " : "") + labels[k];
        ranges.push_back(std::move(r));
    }
    std::stable_sort(ranges.begin(), ranges.end(), [](const ImpactRange& a, const ImpactRange& b) {
        if (a.relevance != b.relevance) return a.relevance > b.relevance;
        return a.begin < b.begin;
    });
    return ranges;
}

} // namespace pktcam
