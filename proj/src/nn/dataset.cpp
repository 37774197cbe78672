#include "pktcam/nn/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "pktcam/error.hpp"
#include "pktcam/rng.hpp"

namespace pktcam::nn {

void Dataset::add(std::span<const float> input, int label) {
    if (input.size() != sample_len) throw ShapeError("sample length does not match dataset");
    if (label < 0 || label >= num_classes()) throw DataError("label " + std::to_string(label) + " out of range");
    inputs.insert(inputs.end(), input.begin(), input.end());
    labels.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.class_names = class_names;
    out.sample_len = sample_len;
    out.inputs.reserve(indices.size() * sample_len);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        const auto s = sample(i);
        out.inputs.insert(out.inputs.end(), s.begin(), s.end());
        out.labels.push_back(labels[i]);
    }
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& data) {
    std::vector<std::vector<std::size_t>> by_class(data.class_names.size());
    for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    return by_class;
}

} // namespace

Dataset undersample(const Dataset& data, std::size_t target_per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> keep;
    for (auto& idx : indices_by_class(data)) {
        if (idx.size() > target_per_class) {
            rng.shuffle(idx);
            idx.resize(target_per_class);
        }
        keep.insert(keep.end(), idx.begin(), idx.end());
    }
    std::sort(keep.begin(), keep.end());
    return data.subset(keep);
}

Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("split fraction must be in (0, 1)");
    Rng rng(seed);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    auto by_class = indices_by_class(data);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 2) {
            throw DataError("class '" + data.class_names[c] + "' has " + std::to_string(idx.size()) +
                            " samples; at least 2 are needed for a train/test split");
        }
        rng.shuffle(idx);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return Split{data.subset(train_idx), data.subset(test_idx)};
}

} // namespace pktcam::nn
