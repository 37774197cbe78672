#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pktcam/preprocess.hpp"

namespace pktcam::nn {

/// Labelled, normalized model inputs stored back to back.
struct Dataset {
    std::vector<std::string> class_names;
    std::size_t sample_len = kVectorLen;
    std::vector<float> inputs;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    int num_classes() const noexcept { return static_cast<int>(class_names.size()); }
    std::span<const float> sample(std::size_t i) const { return {inputs.data() + i * sample_len, sample_len}; }

    void add(std::span<const float> input, int label);
    void add(const FeatureVector& v, int label) { add(std::span<const float>(v.normalized), label); }
    Dataset subset(std::span<const std::size_t> indices) const;
    std::vector<std::size_t> class_counts() const;
};

/// Reduces every class to min(target, available) by seeded sampling without replacement; order is preserved.
Dataset undersample(const Dataset& data, std::size_t target_per_class, std::uint64_t seed);

struct Split {
    Dataset train;
    Dataset test;
};

/// Per-class seeded split; each class keeps at least one sample on each side. Throws DataError for classes under 2.
Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed);

} // namespace pktcam::nn
