#include "pktcam/pcap.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

namespace pktcam {

const char* to_string(PcapErrorKind kind) noexcept {
    switch (kind) {
    case PcapErrorKind::UnknownMagic: return "UnknownMagic";
    case PcapErrorKind::TruncatedHeader: return "TruncatedHeader";
    case PcapErrorKind::TruncatedRecord: return "TruncatedRecord";
    case PcapErrorKind::Io: return "Io";
    }
    return "Unknown";
}

GlobalHeader parse_global_header(ByteView bytes) {
    if (bytes.size() < kGlobalHeaderSize) {
        throw PcapError(PcapErrorKind::TruncatedHeader, 0,
                        "pcap global header needs 24 bytes, got " + std::to_string(bytes.size()));
    }
    GlobalHeader h;
    const std::uint32_t as_big = load_be32(bytes, 0);
    const std::uint32_t as_little = load32(bytes, 0, ByteOrder::Little);
    if (as_big == kMagicMicros || as_big == kMagicNanos) {
        h.byte_order = ByteOrder::Big;
        h.magic = as_big;
    } else if (as_little == kMagicMicros || as_little == kMagicNanos) {
        h.byte_order = ByteOrder::Little;
        h.magic = as_little;
    } else {
        std::ostringstream msg;
        msg << "not a classic pcap file (magic 0x" << std::hex << as_big << ")";
        throw PcapError(PcapErrorKind::UnknownMagic, 0, msg.str());
    }
    h.ts_resolution = h.magic == kMagicNanos ? TsResolution::Nano : TsResolution::Micro;
    h.version_major = load16(bytes, 4, h.byte_order);
    h.version_minor = load16(bytes, 6, h.byte_order);
    h.thiszone = load32(bytes, 8, h.byte_order);
    h.sigfigs = load32(bytes, 12, h.byte_order);
    h.snaplen = load32(bytes, 16, h.byte_order);
    h.linktype = load32(bytes, 20, h.byte_order);
    return h;
}

Bytes serialize_global_header(const GlobalHeader& h) {
    Bytes out;
    out.reserve(kGlobalHeaderSize);
    store32(out, h.magic, h.byte_order);
    store16(out, h.version_major, h.byte_order);
    store16(out, h.version_minor, h.byte_order);
    store32(out, h.thiszone, h.byte_order);
    store32(out, h.sigfigs, h.byte_order);
    store32(out, h.snaplen, h.byte_order);
    store32(out, h.linktype, h.byte_order);
    return out;
}

Bytes serialize_record(const PacketRecord& r, ByteOrder order) {
    Bytes out;
    out.reserve(kRecordHeaderSize + r.data.size());
    store32(out, r.ts_seconds, order);
    store32(out, r.ts_subseconds, order);
    store32(out, r.captured_len, order);
    store32(out, r.original_len, order);
    out.insert(out.end(), r.data.begin(), r.data.end());
    return out;
}

std::int64_t timestamp_ns(const PacketRecord& r, TsResolution resolution) {
    const std::int64_t sub = resolution == TsResolution::Nano ? std::int64_t{r.ts_subseconds}
                                                              : std::int64_t{r.ts_subseconds} * 1000;
    return std::int64_t{r.ts_seconds} * 1'000'000'000 + sub;
}

namespace {

std::size_t read_some(std::istream& in, std::uint8_t* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount());
}

} // namespace

PcapReader::PcapReader(std::istream& in) : in_(in) {
    std::array<std::uint8_t, kGlobalHeaderSize> buf{};
    const std::size_t got = read_some(in_, buf.data(), buf.size());
    header_ = parse_global_header(ByteView(buf.data(), got));
    offset_ = kGlobalHeaderSize;
}

std::optional<PacketRecord> PcapReader::next() {
    if (done_) return std::nullopt;

    std::array<std::uint8_t, kRecordHeaderSize> hdr{};
    const std::size_t got = read_some(in_, hdr.data(), hdr.size());
    if (got == 0) {
        done_ = true;
        return std::nullopt;
    }
    if (got < kRecordHeaderSize) {
        done_ = true;
        error_ = PcapError(PcapErrorKind::TruncatedRecord, offset_,
                           "record header at offset " + std::to_string(offset_) + " has only " +
                               std::to_string(got) + " of 16 bytes");
        return std::nullopt;
    }

    const ByteOrder order = header_.byte_order;
    PacketRecord rec;
    rec.ts_seconds = load32(hdr, 0, order);
    rec.ts_subseconds = load32(hdr, 4, order);
    rec.captured_len = load32(hdr, 8, order);
    rec.original_len = load32(hdr, 12, order);

    // Read in bounded chunks so a corrupt length cannot force a huge allocation up front.
    constexpr std::size_t kChunk = 1 << 16;
    std::size_t remaining = rec.captured_len;
    while (remaining > 0) {
        const std::size_t want = std::min(remaining, kChunk);
        const std::size_t old = rec.data.size();
        rec.data.resize(old + want);
        const std::size_t body = read_some(in_, rec.data.data() + old, want);
        if (body < want) {
            done_ = true;
            const std::size_t have = old + body;
            error_ = PcapError(PcapErrorKind::TruncatedRecord, offset_,
                               "record at offset " + std::to_string(offset_) + " declares " +
                                   std::to_string(rec.captured_len) + " bytes but only " +
                                   std::to_string(have) + " remain");
            return std::nullopt;
        }
        remaining -= want;
    }
    offset_ += kRecordHeaderSize + rec.captured_len;
    return rec;
}

PcapFile read_pcap(ByteView bytes) {
    std::istringstream in(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    PcapReader reader(in);
    PcapFile file;
    file.header = reader.header();
    while (auto rec = reader.next()) file.records.push_back(std::move(*rec));
    file.tail_error = reader.error();
    return file;
}

PcapFile read_pcap_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PcapError(PcapErrorKind::Io, 0, "cannot open " + path.string());
    PcapReader reader(in);
    PcapFile file;
    file.header = reader.header();
    while (auto rec = reader.next()) file.records.push_back(std::move(*rec));
    file.tail_error = reader.error();
    return file;
}

Bytes write_pcap(const GlobalHeader& header, const std::vector<PacketRecord>& records) {
    Bytes out = serialize_global_header(header);
    for (const auto& r : records) {
        Bytes rec = serialize_record(r, header.byte_order);
        out.insert(out.end(), rec.begin(), rec.end());
    }
    return out;
}

void write_pcap_file(const std::filesystem::path& path, const GlobalHeader& header,
                     const std::vector<PacketRecord>& records) {
    const Bytes bytes = write_pcap(header, records);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PcapError(PcapErrorKind::Io, 0, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace pktcam
