#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pktcam/bytes.hpp"
#include "pktcam/pcap.hpp"

namespace pktcam {

/// Half-open byte range [begin, end) into a record's data.
struct ByteRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool empty() const noexcept { return end <= begin; }
    bool contains(std::size_t offset) const noexcept { return offset >= begin && offset < end; }
    bool operator==(const ByteRange&) const = default;
};

struct FieldSpan {
    std::string name; ///< dotted protocol field name, e.g. "ip.src", "tcp.srcport"
    ByteRange range;
    std::string value; ///< display rendering of the decoded value
};

struct EthernetLayer {
    std::array<std::uint8_t, 6> dst_mac{};
    std::array<std::uint8_t, 6> src_mac{};
    std::uint16_t ethertype = 0; ///< innermost type after any 802.1Q tags
    std::vector<std::uint16_t> vlan_ids;
    ByteRange span;
};

struct IpLayer {
    int version = 4;
    std::array<std::uint8_t, 16> src_addr{}; ///< IPv4 uses the first 4 bytes
    std::array<std::uint8_t, 16> dst_addr{};
    std::uint8_t protocol = 0;   ///< IPv4 protocol or final IPv6 next-header
    std::size_t header_len = 0;  ///< includes IPv4 options / walked IPv6 extension headers
    bool later_fragment = false; ///< fragment with non-zero offset: no transport header inside
    ByteRange span;
    ByteRange src_span;
    ByteRange dst_span;

    std::size_t address_len() const noexcept { return version == 4 ? 4 : 16; }
};

enum class TransportKind { Tcp, Udp };

namespace tcp_flag {
inline constexpr std::uint8_t Fin = 0x01;
inline constexpr std::uint8_t Syn = 0x02;
inline constexpr std::uint8_t Rst = 0x04;
inline constexpr std::uint8_t Psh = 0x08;
inline constexpr std::uint8_t Ack = 0x10;
inline constexpr std::uint8_t Urg = 0x20;
inline constexpr std::uint8_t Ece = 0x40;
inline constexpr std::uint8_t Cwr = 0x80;
} // namespace tcp_flag

struct TransportLayer {
    TransportKind kind = TransportKind::Tcp;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::size_t header_len = 0;
    std::uint8_t flags = 0; ///< TCP only
    std::uint32_t seq = 0;  ///< TCP only
    std::uint32_t ack = 0;  ///< TCP only
    ByteRange span;
};

/**
 * Protocol layers of one captured frame with byte provenance.
 *
 * Layer spans, payload_span and trailer_span tile [0, captured_len) without
 * overlap. trailer_span holds link-layer bytes past the end declared by the
 * IP header (Ethernet minimum-frame padding).
 */
struct DecodedPacket {
    std::size_t record_index = 0;
    std::uint32_t linktype = kLinkTypeEthernet;
    std::size_t captured_len = 0;
    std::optional<EthernetLayer> ethernet;
    std::optional<IpLayer> ip;
    std::optional<TransportLayer> transport;
    ByteRange payload_span;
    ByteRange trailer_span;
    std::vector<FieldSpan> field_spans;

    const FieldSpan* field(std::string_view name) const;
};

/// Total: never throws on malformed data, decodes as deep as the bytes allow.
DecodedPacket dissect(ByteView data, std::uint32_t linktype, std::size_t record_index = 0);

inline DecodedPacket dissect(const PacketRecord& record, std::uint32_t linktype, std::size_t record_index = 0) {
    return dissect(ByteView(record.data), linktype, record_index);
}

std::string format_address(const IpLayer& ip, bool source);
std::string format_mac(const std::array<std::uint8_t, 6>& mac);
std::string tcp_flags_string(std::uint8_t flags);

/// Short protocol column value: "TCP", "UDP", "ICMP", "ARP", ...
std::string protocol_name(const DecodedPacket& pkt);
/// Transport kind plus TCP flag summary, e.g. "TCP [SYN,ACK]".
std::string packet_type(const DecodedPacket& pkt);

/// Human label of the protocol unit a field belongs to, e.g. "tcp.srcport" -> "source/destination ports".
std::string field_group_label(std::string_view field_name);

} // namespace pktcam
