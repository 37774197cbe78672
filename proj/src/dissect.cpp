#include "pktcam/dissect.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

namespace pktcam {

namespace {

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86DD;
constexpr std::uint16_t kEtherArp = 0x0806;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88A8;

constexpr std::uint8_t kProtoTcp = 6;
constexpr std::uint8_t kProtoUdp = 17;

std::string hex(std::uint32_t v, int width) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%0*x", width, v);
    return buf;
}

std::string ethertype_name(std::uint16_t type) {
    switch (type) {
    case kEtherIpv4: return hex(type, 4) + " (IPv4)";
    case kEtherIpv6: return hex(type, 4) + " (IPv6)";
    case kEtherArp: return hex(type, 4) + " (ARP)";
    case kEtherVlan: return hex(type, 4) + " (802.1Q)";
    default: return hex(type, 4);
    }
}

class Dissector {
public:
    Dissector(ByteView data, DecodedPacket& out) : d_(data), out_(out) {}

    void add(std::string name, std::size_t begin, std::size_t end, std::string value) {
        out_.field_spans.push_back(FieldSpan{std::move(name), ByteRange{begin, end}, std::move(value)});
    }

    void run() {
        const std::size_t n = d_.size();
        out_.captured_len = n;
        out_.payload_span = ByteRange{0, n};
        out_.trailer_span = ByteRange{n, n};
        if (out_.linktype != kLinkTypeEthernet || n < 14) return;

        EthernetLayer eth;
        std::copy_n(d_.begin(), 6, eth.dst_mac.begin());
        std::copy_n(d_.begin() + 6, 6, eth.src_mac.begin());
        add("eth.dst", 0, 6, format_mac(eth.dst_mac));
        add("eth.src", 6, 12, format_mac(eth.src_mac));
        std::uint16_t type = load_be16(d_, 12);
        add("eth.type", 12, 14, ethertype_name(type));
        std::size_t off = 14;
        while ((type == kEtherVlan || type == kEtherQinQ) && n >= off + 4) {
            const std::uint16_t tci = load_be16(d_, off);
            eth.vlan_ids.push_back(tci & 0x0FFF);
            add("vlan.tci", off, off + 2, "id " + std::to_string(tci & 0x0FFF));
            type = load_be16(d_, off + 2);
            add("vlan.type", off + 2, off + 4, ethertype_name(type));
            off += 4;
        }
        eth.ethertype = type;
        eth.span = ByteRange{0, off};
        out_.ethernet = eth;
        out_.payload_span = ByteRange{off, n};

        if (type == kEtherIpv4) {
            ipv4(off);
        } else if (type == kEtherIpv6) {
            ipv6(off);
        }
    }

private:
    void ipv4(std::size_t off) {
        const std::size_t n = d_.size();
        if (n < off + 20 || (d_[off] >> 4) != 4) return;
        const std::size_t hl = std::size_t{d_[off] & 0x0Fu} * 4;
        if (hl < 20 || n < off + hl) return;

        IpLayer ip;
        ip.version = 4;
        ip.header_len = hl;
        ip.protocol = d_[off + 9];
        std::copy_n(d_.begin() + off + 12, 4, ip.src_addr.begin());
        std::copy_n(d_.begin() + off + 16, 4, ip.dst_addr.begin());
        ip.span = ByteRange{off, off + hl};
        ip.src_span = ByteRange{off + 12, off + 16};
        ip.dst_span = ByteRange{off + 16, off + 20};
        const std::uint16_t flags_frag = load_be16(d_, off + 6);
        ip.later_fragment = (flags_frag & 0x1FFF) != 0;

        // Total length 0 shows up in captures taken before segmentation offload; trust the capture then.
        const std::size_t total = load_be16(d_, off + 2);
        const std::size_t ip_end = total >= hl ? std::min(n, off + total) : n;

        add("ip.version", off, off + 1, "4");
        add("ip.ihl", off, off + 1, std::to_string(hl) + " bytes");
        add("ip.tos", off + 1, off + 2, hex(d_[off + 1], 2));
        add("ip.len", off + 2, off + 4, std::to_string(total));
        add("ip.id", off + 4, off + 6, hex(load_be16(d_, off + 4), 4));
        add("ip.flags_frag", off + 6, off + 8, hex(flags_frag, 4));
        add("ip.ttl", off + 8, off + 9, std::to_string(d_[off + 8]));
        add("ip.proto", off + 9, off + 10, std::to_string(ip.protocol));
        add("ip.checksum", off + 10, off + 12, hex(load_be16(d_, off + 10), 4));
        add("ip.src", off + 12, off + 16, format_address(ip, true));
        add("ip.dst", off + 16, off + 20, format_address(ip, false));
        if (hl > 20) add("ip.options", off + 20, off + hl, std::to_string(hl - 20) + " bytes");

        out_.ip = ip;
        finish_ip(off + hl, ip_end, ip.protocol, !ip.later_fragment);
    }

    void ipv6(std::size_t off) {
        const std::size_t n = d_.size();
        if (n < off + 40 || (d_[off] >> 4) != 6) return;

        IpLayer ip;
        ip.version = 6;
        std::copy_n(d_.begin() + off + 8, 16, ip.src_addr.begin());
        std::copy_n(d_.begin() + off + 24, 16, ip.dst_addr.begin());
        ip.src_span = ByteRange{off + 8, off + 24};
        ip.dst_span = ByteRange{off + 24, off + 40};
        const std::size_t plen = load_be16(d_, off + 4);
        const std::size_t ip_end = plen == 0 ? n : std::min(n, off + 40 + plen);

        const std::uint32_t first = load_be32(d_, off);
        add("ipv6.version", off, off + 1, "6");
        add("ipv6.tclass_flow", off, off + 4,
            "tc " + hex((first >> 20) & 0xFF, 2) + " flow " + hex(first & 0xFFFFF, 5));
        add("ipv6.plen", off + 4, off + 6, std::to_string(plen));
        std::uint8_t next = d_[off + 6];
        add("ipv6.nxt", off + 6, off + 7, std::to_string(next));
        add("ipv6.hlim", off + 7, off + 8, std::to_string(d_[off + 7]));
        add("ipv6.src", off + 8, off + 24, format_address(ip, true));
        add("ipv6.dst", off + 24, off + 40, format_address(ip, false));

        // Walk the common extension headers; anything else ends the IP header.
        std::size_t cur = off + 40;
        bool transport_ok = true;
        for (;;) {
            if (next == 0 || next == 43 || next == 60) {
                if (ip_end < cur + 8) { transport_ok = false; break; }
                const std::size_t len = (std::size_t{d_[cur + 1]} + 1) * 8;
                if (ip_end < cur + len) { transport_ok = false; break; }
                add("ipv6.ext", cur, cur + len, "next header " + std::to_string(next));
                next = d_[cur];
                cur += len;
            } else if (next == 44) {
                if (ip_end < cur + 8) { transport_ok = false; break; }
                add("ipv6.ext", cur, cur + 8, "fragment");
                if ((load_be16(d_, cur + 2) >> 3) != 0) ip.later_fragment = true;
                next = d_[cur];
                cur += 8;
            } else {
                break;
            }
        }
        ip.protocol = next;
        ip.header_len = cur - off;
        ip.span = ByteRange{off, cur};
        out_.ip = ip;
        finish_ip(cur, ip_end, next, transport_ok && !ip.later_fragment);
    }

    void finish_ip(std::size_t t, std::size_t ip_end, std::uint8_t proto, bool may_have_transport) {
        const std::size_t n = d_.size();
        out_.payload_span = ByteRange{t, ip_end};
        out_.trailer_span = ByteRange{ip_end, n};
        if (!may_have_transport) return;

        if (proto == kProtoTcp && ip_end >= t + 20) {
            const std::size_t hl = static_cast<std::size_t>(d_[t + 12] >> 4) * 4;
            if (hl < 20 || ip_end < t + hl) return;
            TransportLayer tcp;
            tcp.kind = TransportKind::Tcp;
            tcp.src_port = load_be16(d_, t);
            tcp.dst_port = load_be16(d_, t + 2);
            tcp.seq = load_be32(d_, t + 4);
            tcp.ack = load_be32(d_, t + 8);
            tcp.flags = d_[t + 13];
            tcp.header_len = hl;
            tcp.span = ByteRange{t, t + hl};
            add("tcp.srcport", t, t + 2, std::to_string(tcp.src_port));
            add("tcp.dstport", t + 2, t + 4, std::to_string(tcp.dst_port));
            add("tcp.seq", t + 4, t + 8, std::to_string(tcp.seq));
            add("tcp.ack", t + 8, t + 12, std::to_string(tcp.ack));
            add("tcp.data_offset", t + 12, t + 13, std::to_string(hl) + " bytes");
            add("tcp.reserved", t + 12, t + 13, hex(d_[t + 12] & 0x0F, 1));
            add("tcp.flags", t + 13, t + 14, tcp_flags_string(tcp.flags));
            add("tcp.window", t + 14, t + 16, std::to_string(load_be16(d_, t + 14)));
            add("tcp.checksum", t + 16, t + 18, hex(load_be16(d_, t + 16), 4));
            add("tcp.urgent", t + 18, t + 20, std::to_string(load_be16(d_, t + 18)));
            if (hl > 20) add("tcp.options", t + 20, t + hl, std::to_string(hl - 20) + " bytes");
            out_.transport = tcp;
            out_.payload_span = ByteRange{t + hl, ip_end};
        } else if (proto == kProtoUdp && ip_end >= t + 8) {
            TransportLayer udp;
            udp.kind = TransportKind::Udp;
            udp.src_port = load_be16(d_, t);
            udp.dst_port = load_be16(d_, t + 2);
            udp.header_len = 8;
            udp.span = ByteRange{t, t + 8};
            add("udp.srcport", t, t + 2, std::to_string(udp.src_port));
            add("udp.dstport", t + 2, t + 4, std::to_string(udp.dst_port));
            add("udp.length", t + 4, t + 6, std::to_string(load_be16(d_, t + 4)));
            add("udp.checksum", t + 6, t + 8, hex(load_be16(d_, t + 6), 4));
            out_.transport = udp;
            out_.payload_span = ByteRange{t + 8, ip_end};
        }
    }

    ByteView d_;
    DecodedPacket& out_;
};

} // namespace

const FieldSpan* DecodedPacket::field(std::string_view name) const {
    for (const auto& f : field_spans) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

DecodedPacket dissect(ByteView data, std::uint32_t linktype, std::size_t record_index) {
    DecodedPacket out;
    out.record_index = record_index;
    out.linktype = linktype;
    Dissector(data, out).run();
    return out;
}

std::string format_mac(const std::array<std::uint8_t, 6>& mac) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2], mac[3], mac[4],
                  mac[5]);
    return buf;
}

std::string format_address(const IpLayer& ip, bool source) {
    const auto& a = source ? ip.src_addr : ip.dst_addr;
    if (ip.version == 4) {
        return std::to_string(a[0]) + "." + std::to_string(a[1]) + "." + std::to_string(a[2]) + "." +
               std::to_string(a[3]);
    }
    // RFC 5952 style: lowercase, longest run of two or more zero groups compressed.
    std::array<std::uint16_t, 8> g{};
    for (int i = 0; i < 8; ++i) g[i] = static_cast<std::uint16_t>((a[2 * i] << 8) | a[2 * i + 1]);
    int best = -1, best_len = 0;
    for (int i = 0; i < 8;) {
        if (g[i] != 0) { ++i; continue; }
        int j = i;
        while (j < 8 && g[j] == 0) ++j;
        if (j - i > best_len && j - i >= 2) { best = i; best_len = j - i; }
        i = j;
    }
    std::string s;
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        if (i == best) {
            s += "::";
            i += best_len - 1;
            continue;
        }
        if (!s.empty() && s.back() != ':') s += ':';
        std::snprintf(buf, sizeof buf, "%x", g[i]);
        s += buf;
    }
    return s;
}

std::string tcp_flags_string(std::uint8_t flags) {
    static constexpr std::pair<std::uint8_t, const char*> kNames[] = {
        {tcp_flag::Syn, "SYN"}, {tcp_flag::Ack, "ACK"}, {tcp_flag::Fin, "FIN"}, {tcp_flag::Rst, "RST"},
        {tcp_flag::Psh, "PSH"}, {tcp_flag::Urg, "URG"}, {tcp_flag::Ece, "ECE"}, {tcp_flag::Cwr, "CWR"},
    };
    std::string s;
    for (const auto& [bit, name] : kNames) {
        if (flags & bit) {
            if (!s.empty()) s += ',';
            s += name;
        }
    }
    return s;
}

std::string protocol_name(const DecodedPacket& pkt) {
    if (pkt.transport) return pkt.transport->kind == TransportKind::Tcp ? "TCP" : "UDP";
    if (pkt.ip) {
        switch (pkt.ip->protocol) {
        case 1: return "ICMP";
        case 58: return "ICMPv6";
        case kProtoTcp: return "TCP";
        case kProtoUdp: return "UDP";
        default: return pkt.ip->version == 4 ? "IPv4" : "IPv6";
        }
    }
    if (pkt.ethernet) return pkt.ethernet->ethertype == kEtherArp ? "ARP" : "Ethernet";
    return "Unknown";
}

std::string packet_type(const DecodedPacket& pkt) {
    std::string s = protocol_name(pkt);
    if (pkt.transport && pkt.transport->kind == TransportKind::Tcp) s += " [" + tcp_flags_string(pkt.transport->flags) + "]";
    return s;
}

std::string field_group_label(std::string_view name) {
    static const std::unordered_map<std::string_view, const char*> kLabels = {
        {"eth.dst", "destination/source MAC"},
        {"eth.src", "destination/source MAC"},
        {"eth.type", "ethertype"},
        {"vlan.tci", "VLAN tag"},
        {"vlan.type", "VLAN tag"},
        {"ip.version", "version"},
        {"ip.ihl", "header length"},
        {"ip.tos", "type of service"},
        {"ip.len", "total length"},
        {"ip.id", "identification"},
        {"ip.flags_frag", "flags/fragment offset"},
        {"ip.ttl", "time to live"},
        {"ip.proto", "protocol"},
        {"ip.checksum", "header checksum"},
        {"ip.src", "source/destination addresses"},
        {"ip.dst", "source/destination addresses"},
        {"ip.options", "IP options"},
        {"ipv6.version", "version"},
        {"ipv6.tclass_flow", "traffic class/flow label"},
        {"ipv6.plen", "payload length"},
        {"ipv6.nxt", "next header"},
        {"ipv6.hlim", "hop limit"},
        {"ipv6.src", "source/destination addresses"},
        {"ipv6.dst", "source/destination addresses"},
        {"ipv6.ext", "extension headers"},
        {"tcp.srcport", "source/destination ports"},
        {"tcp.dstport", "source/destination ports"},
        {"tcp.seq", "sequence number"},
        {"tcp.ack", "acknowledgment number"},
        {"tcp.data_offset", "data offset"},
        {"tcp.reserved", "res"},
        {"tcp.flags", "flags"},
        {"tcp.window", "window size"},
        {"tcp.checksum", "checksum"},
        {"tcp.urgent", "urgent pointer"},
        {"tcp.options", "TCP options"},
        {"udp.srcport", "source/destination ports"},
        {"udp.dstport", "source/destination ports"},
        {"udp.length", "length"},
        {"udp.checksum", "header and data checksum"},
    };
    const auto it = kLabels.find(name);
    return it != kLabels.end() ? it->second : std::string(name);
}

} // namespace pktcam
