#include "pktcam/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pktcam/error.hpp"
#include "pktcam/pcap.hpp"

namespace pktcam {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

} // namespace

int Manifest::class_id(const std::string& name) const {
    const auto it = std::lower_bound(class_names.begin(), class_names.end(), name);
    if (it == class_names.end() || *it != name) throw DataError("unknown class '" + name + "'");
    return static_cast<int>(it - class_names.begin());
}

Manifest load_manifest(const std::filesystem::path& dir) {
    const auto label_path = dir / kLabelFile;
    std::ifstream in(label_path);
    if (!in) throw DataError("cannot open " + label_path.string());
    Manifest m;
    m.root = dir;
    std::set<std::string> names;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw DataError(label_path.string() + ":" + std::to_string(line_no) + ": expected 'file,class'");
        }
        const std::string file = trim(line.substr(0, comma));
        const std::string cls = trim(line.substr(comma + 1));
        if (line_no == 1 && file == "file" && cls == "class") continue;
        if (file.empty() || cls.empty()) {
            throw DataError(label_path.string() + ":" + std::to_string(line_no) + ": empty file or class");
        }
        if (!std::filesystem::exists(dir / file)) throw DataError("capture listed in manifest not found: " + file);
        m.entries.push_back({file, cls});
        names.insert(cls);
    }
    if (m.entries.empty()) throw DataError(label_path.string() + " lists no captures");
    m.class_names.assign(names.begin(), names.end());
    return m;
}

void write_manifest(const Manifest& manifest) {
    std::ofstream out(manifest.root / kLabelFile, std::ios::trunc);
    if (!out) throw DataError("cannot write " + (manifest.root / kLabelFile).string());
    out << "file,class\n";
    for (const auto& e : manifest.entries) out << e.file.string() << ',' << e.class_name << '\n';
}

nn::Dataset build_dataset(const Manifest& manifest, LoadStats* stats) {
    nn::Dataset data;
    data.class_names = manifest.class_names;
    LoadStats local;
    for (const auto& e : manifest.entries) {
        const int label = manifest.class_id(e.class_name);
        PcapFile file;
        try {
            file = read_pcap_file(manifest.root / e.file);
        } catch (const PcapError& err) {
            throw DataError(e.file.string() + ": " + err.what());
        }
        if (file.tail_error) ++local.truncated_files;
        for (std::size_t i = 0; i < file.records.size(); ++i) {
            ++local.records;
            const DecodedPacket pkt = dissect(file.records[i], file.header.linktype, i);
            const auto outcome = preprocess(pkt, file.records[i].data);
            if (const auto* v = std::get_if<FeatureVector>(&outcome)) {
                data.add(*v, label);
                ++local.vectorized;
            } else {
                ++local.skipped[std::get<SkipReason>(outcome)];
            }
        }
    }
    if (stats) *stats = local;
    return data;
}

} // namespace pktcam
