#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pktcam/nn/dataset.hpp"
#include "pktcam/preprocess.hpp"

namespace pktcam {

/**
 * A dataset directory: capture files plus labels.csv with one
 * "file,class" line per capture (a "file,class" header line is optional).
 * Class ids follow the sorted order of the class names.
 */
struct Manifest {
    struct Entry {
        std::filesystem::path file;
        std::string class_name;
    };
    std::filesystem::path root;
    std::vector<std::string> class_names;
    std::vector<Entry> entries;

    int class_id(const std::string& name) const;
};

inline constexpr const char* kLabelFile = "labels.csv";

/// Throws DataError for a missing or malformed label file or a missing capture.
Manifest load_manifest(const std::filesystem::path& dir);
void write_manifest(const Manifest& manifest);

struct LoadStats {
    std::size_t records = 0;
    std::size_t vectorized = 0;
    std::map<SkipReason, std::size_t> skipped;
    std::size_t truncated_files = 0;
};

/// Reads every capture, skipping non-model packets, into a labelled dataset.
nn::Dataset build_dataset(const Manifest& manifest, LoadStats* stats = nullptr);

} // namespace pktcam
