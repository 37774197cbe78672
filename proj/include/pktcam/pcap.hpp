#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pktcam/bytes.hpp"
#include "pktcam/error.hpp"

namespace pktcam {

/**
 * Classic libpcap file layout.
 *
 * A 24-byte global header followed by records, each a 16-byte header and
 * captured_len bytes of link-layer data. The magic number fixes byte order
 * and timestamp resolution for the whole file:
 *
 *   bytes A1 B2 C3 D4  big-endian,    microseconds
 *   bytes D4 C3 B2 A1  little-endian, microseconds
 *   bytes A1 B2 3C 4D  big-endian,    nanoseconds
 *   bytes 4D 3C B2 A1  little-endian, nanoseconds
 */
inline constexpr std::size_t kGlobalHeaderSize = 24;
inline constexpr std::size_t kRecordHeaderSize = 16;

inline constexpr std::uint32_t kMagicMicros = 0xA1B2C3D4;
inline constexpr std::uint32_t kMagicNanos = 0xA1B23C4D;

inline constexpr std::uint32_t kLinkTypeEthernet = 1;

enum class TsResolution { Micro, Nano };

struct GlobalHeader {
    std::uint32_t magic = kMagicMicros; ///< kMagicMicros or kMagicNanos, independent of byte order
    ByteOrder byte_order = ByteOrder::Little;
    TsResolution ts_resolution = TsResolution::Micro;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::uint32_t thiszone = 0; ///< retained verbatim, not interpreted
    std::uint32_t sigfigs = 0;  ///< retained verbatim, not interpreted
    std::uint32_t snaplen = 65535;
    std::uint32_t linktype = kLinkTypeEthernet;

    bool operator==(const GlobalHeader&) const = default;
};

struct PacketRecord {
    std::uint32_t ts_seconds = 0;
    std::uint32_t ts_subseconds = 0; ///< micro- or nanoseconds per GlobalHeader::ts_resolution
    std::uint32_t captured_len = 0;
    std::uint32_t original_len = 0;
    Bytes data;

    bool operator==(const PacketRecord&) const = default;
};

/// Throws PcapError (TruncatedHeader, UnknownMagic).
GlobalHeader parse_global_header(ByteView bytes);

Bytes serialize_global_header(const GlobalHeader& header);
Bytes serialize_record(const PacketRecord& record, ByteOrder order);

/// Timestamp of a record in nanoseconds since the epoch.
std::int64_t timestamp_ns(const PacketRecord& record, TsResolution resolution);

/**
 * Sequential record reader over a stream positioned at the start of a file.
 *
 * next() yields records until end of stream. A short record header or body
 * stops iteration and leaves the failure in error(); records already
 * returned stay valid.
 */
class PcapReader {
public:
    /// Reads and validates the global header; throws PcapError on failure.
    explicit PcapReader(std::istream& in);

    const GlobalHeader& header() const noexcept { return header_; }
    std::optional<PacketRecord> next();
    const std::optional<PcapError>& error() const noexcept { return error_; }
    /// Offset of the next unread byte.
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::istream& in_;
    GlobalHeader header_;
    std::uint64_t offset_ = 0;
    std::optional<PcapError> error_;
    bool done_ = false;
};

struct PcapFile {
    GlobalHeader header;
    std::vector<PacketRecord> records;
    /// Set when the file ends inside a record; `records` holds the valid prefix.
    std::optional<PcapError> tail_error;
};

/// Whole-buffer convenience wrapper around PcapReader.
PcapFile read_pcap(ByteView bytes);
PcapFile read_pcap_file(const std::filesystem::path& path);

Bytes write_pcap(const GlobalHeader& header, const std::vector<PacketRecord>& records);
void write_pcap_file(const std::filesystem::path& path, const GlobalHeader& header,
                     const std::vector<PacketRecord>& records);

} // namespace pktcam
