#include "pktcam/nn/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <json.hpp>
#include <zlib.h>

#include "pktcam/error.hpp"

namespace pktcam::nn {

namespace {

constexpr std::string_view kMagic = "PKTCAMMD";

std::uint32_t crc32_of(ByteView bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in pieces.
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        crc = crc32(crc, bytes.data() + done, n);
        done += n;
    }
    return static_cast<std::uint32_t>(crc);
}

struct TensorRef {
    std::string name;
    std::vector<std::size_t> shape;
    std::span<float> data;
};

std::vector<TensorRef> tensor_table(CnnModel<float>& model) {
    std::vector<TensorRef> refs;
    auto& p = model.params;
    for (std::size_t l = 0; l < p.conv.size(); ++l) {
        auto& layer = p.conv[l];
        const auto out = static_cast<std::size_t>(layer.out_channels());
        const auto in = static_cast<std::size_t>(layer.in_channels());
        const auto k = static_cast<std::size_t>(layer.kernel);
        refs.push_back({"conv" + std::to_string(l) + ".weight", {out, in, k},
                        {layer.weights.data(), static_cast<std::size_t>(layer.weights.size())}});
        refs.push_back({"conv" + std::to_string(l) + ".bias", {out},
                        {layer.bias.data(), static_cast<std::size_t>(layer.bias.size())}});
    }
    refs.push_back({"dense.weight",
                    {static_cast<std::size_t>(p.dense.weights.rows()), static_cast<std::size_t>(p.dense.weights.cols())},
                    {p.dense.weights.data(), static_cast<std::size_t>(p.dense.weights.size())}});
    refs.push_back({"dense.bias", {static_cast<std::size_t>(p.dense.bias.size())},
                    {p.dense.bias.data(), static_cast<std::size_t>(p.dense.bias.size())}});
    return refs;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"arch", c.arch},           {"channel_widths", c.channel_widths}, {"kernel_size", c.kernel_size},
            {"num_classes", c.num_classes}, {"input_len", c.input_len},       {"in_channels", c.in_channels},
            {"dense_bias", c.dense_bias}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.arch = j.at("arch").get<std::string>();
    c.channel_widths = j.at("channel_widths").get<std::vector<int>>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.input_len = j.at("input_len").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    c.dense_bias = j.at("dense_bias").get<bool>();
    return c;
}

void put_u32(Bytes& out, std::uint32_t v) { store32(out, v, ByteOrder::Little); }

} // namespace

Bytes serialize_model(const CnnModel<float>& model) {
    CnnModel<float> copy = model; // tensor_table needs mutable spans
    const auto table = tensor_table(copy);

    nlohmann::json header;
    header["config"] = config_to_json(model.config);
    header["class_names"] = model.class_names;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : table) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
    header["tensors"] = tensors;
    const std::string header_text = header.dump();

    Bytes out(kMagic.begin(), kMagic.end());
    put_u32(out, kModelFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out.insert(out.end(), header_text.begin(), header_text.end());
    for (const auto& t : table) {
        for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    put_u32(out, crc32_of(out));
    return out;
}

CnnModel<float> deserialize_model(ByteView bytes) {
    using Kind = ModelFormatErrorKind;
    if (bytes.size() < kMagic.size() + 12 ||
        std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw ModelFormatError(Kind::BadMagic, "not a pktcam model file");
    }
    const std::uint32_t version = load32(bytes, kMagic.size(), ByteOrder::Little);
    if (version != kModelFormatVersion) {
        throw ModelFormatError(Kind::VersionMismatch, "model format version " + std::to_string(version) +
                                                          " is not supported (expected " +
                                                          std::to_string(kModelFormatVersion) + ")");
    }
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored = load32(bytes, body, ByteOrder::Little);
    if (crc32_of(bytes.first(body)) != stored) throw ModelFormatError(Kind::ChecksumMismatch, "model checksum mismatch");

    const std::size_t header_len = load32(bytes, kMagic.size() + 4, ByteOrder::Little);
    std::size_t pos = kMagic.size() + 8;
    if (pos + header_len > body) throw ModelFormatError(Kind::Malformed, "model header overruns file");

    CnnModel<float> model;
    try {
        const auto header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
        const ModelConfig config = config_from_json(header.at("config"));
        model = init_model<float>(config, header.at("class_names").get<std::vector<std::string>>(), 0);
        const auto& tensors = header.at("tensors");
        auto table = tensor_table(model);
        if (tensors.size() != table.size()) throw ModelFormatError(Kind::Malformed, "tensor count mismatch");
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (tensors[i].at("name").get<std::string>() != table[i].name ||
                tensors[i].at("shape").get<std::vector<std::size_t>>() != table[i].shape) {
                throw ModelFormatError(Kind::Malformed, "tensor table does not match config at " + table[i].name);
            }
        }
        pos += header_len;
        for (auto& t : table) {
            if (pos + 4 * t.data.size() > body) throw ModelFormatError(Kind::Malformed, "tensor data truncated");
            for (float& v : t.data) {
                v = std::bit_cast<float>(load32(bytes, pos, ByteOrder::Little));
                pos += 4;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(Kind::Malformed, std::string("model header: ") + e.what());
    } catch (const ShapeError& e) {
        throw ModelFormatError(Kind::Malformed, std::string("model config: ") + e.what());
    }
    if (pos != body) throw ModelFormatError(Kind::Malformed, "trailing bytes after tensor data");
    return model;
}

void save_model(const CnnModel<float>& model, const std::filesystem::path& path) {
    const Bytes bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFormatError(ModelFormatErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ModelFormatError(ModelFormatErrorKind::Io, "write failed for " + path.string());
}

CnnModel<float> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError(ModelFormatErrorKind::Io, "cannot open " + path.string());
    const Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace pktcam::nn
