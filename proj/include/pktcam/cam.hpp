#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pktcam/dissect.hpp"
#include "pktcam/nn/model.hpp"
#include "pktcam/nn/tensor.hpp"
#include "pktcam/preprocess.hpp"

namespace pktcam {

inline constexpr std::size_t kCamRows = 15;
inline constexpr std::size_t kCamCols = 100;
static_assert(kCamRows * kCamCols == kVectorLen);

/**
 * Class activation map over the model input.
 *
 * values[x] = sum_k w_k * F_k(x) for the explained class, where F_k are the
 * last convolutional feature maps. Because the head is GAP followed by a
 * dense layer, mean(values) + bias[class] reproduces that class's logit.
 */
struct Cam {
    int class_id = 0;
    std::vector<double> values; ///< absolute impact per vector position
    std::vector<double> rel;    ///< min-max normalised values; 0.5 everywhere for a constant map
    std::size_t valid_len = kVectorLen;

    double grid(std::size_t row, std::size_t col) const { return values[row * kCamCols + col]; }
    double mean() const;
};

/// Min-max normalisation into [0, 1]; constant input maps to 0.5.
std::vector<double> relative_scale(std::span<const double> values);

/// Throws ShapeError when the weight row length differs from the channel count.
template <class T>
Cam compute_cam(const nn::Tensor<T>& last_feature_maps, std::span<const T> weights_row, int class_id,
                std::size_t valid_len = kVectorLen);

/// CAM for `class_id` from a forward pass of `model`.
template <class T>
Cam explain(const nn::CnnModel<T>& model, const nn::ForwardResult<T>& fwd, int class_id,
            std::size_t valid_len = kVectorLen);

/// Display rows of a CAM cut back to the packet's real length; the last row may be partial.
struct CamGrid {
    std::size_t cols = kCamCols;
    std::size_t valid_len = 0;
    std::vector<std::vector<double>> rows;
};

CamGrid trim_and_grid(const Cam& cam, std::size_t valid_len);

enum class Colormap { Jet, Bwr };

std::optional<Colormap> parse_colormap(std::string_view name);
const char* to_string(Colormap map) noexcept;

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    bool operator==(const Rgb&) const = default;
};

/// t in [0, 1] through the matplotlib-compatible jet or bwr ramp.
Rgb colormap_rgb(double t, Colormap map);

/// Position on the bwr ramp for `value` when the largest magnitude in the map is `peak`; 0 maps to white.
double bwr_position(double value, double peak);

/**
 * One colour per displayed cell (positions below valid_len). Jet uses the
 * relative values; bwr is centred on zero and scaled by the largest magnitude
 * over the whole map, so negative impact is blue and positive red.
 */
std::vector<Rgb> colorize(const Cam& cam, Colormap map);

struct CamSample {
    Cam cam;
    double probability = 0.0;
};

struct ImpactRange {
    std::size_t begin = 0; ///< vector offsets, half-open
    std::size_t end = 0;
    std::string label;               ///< e.g. "source/destination ports" or "payload bytes"
    std::vector<std::string> fields; ///< protocol field names covered by the range
    double relevance = 0.0;          ///< mean relative value over the range
};

struct ClassPattern {
    int class_id = 0;
    std::string class_name;
    std::size_t sample_count = 0;
    std::vector<double> mean_cam;
    std::vector<ImpactRange> top_ranges;
    double confidence_threshold = 0.9;
    std::size_t max_count = 100;
};

inline constexpr double kDefaultMinProbability = 0.9;
inline constexpr std::size_t kDefaultMaxCount = 100;
inline constexpr double kDefaultTopFraction = 0.1;

/// Thrown when no sample survives the probability filter.
class EmptyPatternError : public Error {
public:
    using Error::Error;
};

/**
 * Element-wise mean of the first max_count CAMs (input order) whose source
 * prediction probability is strictly above min_prob.
 */
ClassPattern average_cam(std::span<const CamSample> samples, double min_prob = kDefaultMinProbability,
                         std::size_t max_count = kDefaultMaxCount);

/**
 * Maximal runs of positions whose relative mean CAM is at least 1 - top_fraction,
 * restricted to the representative's valid length and labelled with the
 * protocol fields of the representative packet's layout. Sorted by descending
 * relevance, ties by start offset.
 */
std::vector<ImpactRange> map_impacting_bytes(const ClassPattern& pattern, const DecodedPacket& representative,
                                             ByteView representative_data, double top_fraction = kDefaultTopFraction);

/// Label for a single vector position of a vectorized packet.
std::vector<std::string> position_fields(const DecodedPacket& pkt, const FeatureVector& v, std::size_t position);

} // namespace pktcam
