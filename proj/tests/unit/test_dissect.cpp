#include <doctest.h>

#include <algorithm>

#include "pktcam/dissect.hpp"
#include "support.hpp"

using namespace pktcam;

namespace {

DecodedPacket dissect_fixture(const std::string& name, Bytes* data_out = nullptr) {
    const PcapFile f = read_pcap_file(test::fixture(name + ".pcap"));
    REQUIRE(f.records.size() == 1);
    if (data_out) *data_out = f.records[0].data;
    return dissect(f.records[0], f.header.linktype);
}

// Layer spans + payload + trailer cover [0, n) exactly once.
void check_tiling(const DecodedPacket& p) {
    std::vector<int> cover(p.captured_len, 0);
    auto mark = [&](ByteRange r) {
        REQUIRE(r.end <= p.captured_len);
        for (std::size_t i = r.begin; i < r.end; ++i) ++cover[i];
    };
    if (p.ethernet) mark(p.ethernet->span);
    if (p.ip) mark(p.ip->span);
    if (p.transport) mark(p.transport->span);
    mark(p.payload_span);
    mark(p.trailer_span);
    for (std::size_t i = 0; i < cover.size(); ++i) {
        CAPTURE(i);
        REQUIRE(cover[i] == 1);
    }
}

} // namespace

TEST_CASE("fixtures decode as scapy describes them") {
    const auto exp = test::expected();
    for (const char* name :
         {"tcp_syn", "dns_query", "ipv6_tcp", "ipv6_ext", "ipv4_options", "padded_syn", "tcp_one_byte"}) {
        CAPTURE(name);
        const auto& e = exp[name];
        const DecodedPacket p = dissect_fixture(name);
        check_tiling(p);
        CHECK(p.captured_len == e["length"].get<std::size_t>());
        REQUIRE(p.ethernet);
        REQUIRE(p.ip);
        CHECK(p.ip->version == e["ip_version"].get<int>());
        if (e.contains("ip_header_len")) CHECK(p.ip->header_len == e["ip_header_len"].get<std::size_t>());
        CHECK(format_address(*p.ip, true) == e["ip_src"].get<std::string>());
        REQUIRE(p.transport);
        CHECK((p.transport->kind == TransportKind::Tcp ? "TCP" : "UDP") == e["transport"].get<std::string>());
        CHECK(p.transport->header_len == e["transport_header_len"].get<std::size_t>());
        CHECK(p.transport->src_port == e["src_port"].get<int>());
        CHECK(p.transport->dst_port == e["dst_port"].get<int>());
        CHECK(p.payload_span.size() == e["payload_len"].get<std::size_t>());
        CHECK(p.trailer_span.size() == e["trailer_len"].get<std::size_t>());
    }
}

TEST_CASE("minimal SYN") {
    const DecodedPacket p = dissect_fixture("tcp_syn");
    CHECK(p.captured_len == 54);
    CHECK(p.payload_span.empty());
    CHECK(p.transport->header_len == 20);
    CHECK(p.transport->flags == tcp_flag::Syn);
    CHECK(packet_type(p) == "TCP [SYN]");
    CHECK(protocol_name(p) == "TCP");
}

TEST_CASE("DNS query is UDP with an eight byte header") {
    const DecodedPacket p = dissect_fixture("dns_query");
    CHECK(p.transport->kind == TransportKind::Udp);
    CHECK(p.transport->header_len == 8);
    CHECK(p.field("udp.length"));
    CHECK(packet_type(p) == "UDP");
}

TEST_CASE("ARP has no IP layer") {
    const DecodedPacket p = dissect_fixture("arp");
    CHECK(p.ethernet);
    CHECK_FALSE(p.ip);
    CHECK_FALSE(p.transport);
    CHECK(p.payload_span == ByteRange{14, p.captured_len});
    CHECK(protocol_name(p) == "ARP");
    check_tiling(p);
}

TEST_CASE("field spans slice out the reported values") {
    Bytes data;
    const DecodedPacket p = dissect_fixture("tcp_syn", &data);
    const FieldSpan* src = p.field("ip.src");
    REQUIRE(src);
    CHECK(src->range.size() == 4);
    CHECK(Bytes(data.begin() + src->range.begin, data.begin() + src->range.end) == Bytes{192, 168, 0, 1});
    CHECK(src->value == "192.168.0.1");
    const FieldSpan* dport = p.field("tcp.dstport");
    REQUIRE(dport);
    CHECK(load_be16(data, dport->range.begin) == 80);
    CHECK(dport->value == "80");
    CHECK(p.field("eth.src")->value == "02:00:00:00:00:01");

    Bytes v6;
    const DecodedPacket q = dissect_fixture("ipv6_tcp", &v6);
    const FieldSpan* s6 = q.field("ipv6.src");
    REQUIRE(s6);
    CHECK(s6->range.size() == 16);
    CHECK(s6->value == "2001:db8::1");
    CHECK(std::equal(v6.begin() + s6->range.begin, v6.begin() + s6->range.end, q.ip->src_addr.begin()));
}

TEST_CASE("IPv4 options stay in the IP header span") {
    const DecodedPacket p = dissect_fixture("ipv4_options");
    CHECK(p.ip->header_len == 32);
    CHECK(p.ip->span.size() == 32);
    CHECK(p.field("ip.options"));
    CHECK(p.transport->span.begin == p.ip->span.end);
}

TEST_CASE("IPv6 extension headers are walked") {
    const DecodedPacket p = dissect_fixture("ipv6_ext");
    CHECK(p.ip->protocol == 17);
    CHECK(p.ip->header_len == 40 + 8 + 8);
    CHECK(p.transport->src_port == 5000);
}

TEST_CASE("Ethernet padding lands in the trailer") {
    const DecodedPacket p = dissect_fixture("padded_syn");
    CHECK(p.payload_span.empty());
    CHECK(p.trailer_span == ByteRange{54, 60});
}

TEST_CASE("VLAN tag") {
    Rng rng(1);
    test::FrameSpec s;
    s.payload = 10;
    Bytes f = test::build_frame(s, rng);
    const Bytes tag = {0x81, 0x00, 0x00, 0x2A};
    f.insert(f.begin() + 12, tag.begin(), tag.end());
    const DecodedPacket p = dissect(f, kLinkTypeEthernet);
    REQUIRE(p.ethernet);
    CHECK(p.ethernet->vlan_ids == std::vector<std::uint16_t>{42});
    CHECK(p.ethernet->span.size() == 18);
    REQUIRE(p.transport);
    CHECK(p.payload_span.size() == 10);
    check_tiling(p);
}

TEST_CASE("non-Ethernet linktype is left undecoded") {
    Rng rng(2);
    const Bytes f = test::build_frame({}, rng);
    const DecodedPacket p = dissect(f, 101);
    CHECK_FALSE(p.ethernet);
    CHECK(p.payload_span == ByteRange{0, f.size()});
}

TEST_CASE("later IPv4 fragments carry no transport header") {
    Rng rng(3);
    test::FrameSpec s;
    s.payload = 30;
    Bytes f = test::build_frame(s, rng);
    f[14 + 6] = 0x00;
    f[14 + 7] = 0x10; // fragment offset 16
    const DecodedPacket p = dissect(f, kLinkTypeEthernet);
    REQUIRE(p.ip);
    CHECK(p.ip->later_fragment);
    CHECK_FALSE(p.transport);
    check_tiling(p);
}

TEST_CASE("group labels") {
    CHECK(field_group_label("tcp.srcport") == "source/destination ports");
    CHECK(field_group_label("udp.dstport") == "source/destination ports");
    CHECK(field_group_label("tcp.seq") == "sequence number");
    CHECK(field_group_label("udp.checksum") == "header and data checksum");
    CHECK(field_group_label("mystery") == "mystery");
}

TEST_CASE("dissection is total and tiles every truncation and mutation") {
    Rng rng(99);
    const char* names[] = {"tcp_syn", "dns_query", "arp", "ipv6_tcp", "ipv6_ext", "ipv4_options", "padded_syn"};
    for (const char* name : names) {
        Bytes data;
        dissect_fixture(name, &data);
        for (std::size_t len = 0; len <= data.size(); ++len) {
            const DecodedPacket p = dissect(ByteView(data.data(), len), kLinkTypeEthernet);
            CHECK(p.captured_len == len);
            check_tiling(p);
        }
        for (int trial = 0; trial < 300; ++trial) {
            Bytes m = data;
            const int flips = 1 + static_cast<int>(rng.uniform_index(6));
            for (int k = 0; k < flips; ++k) m[rng.uniform_index(m.size())] = rng.byte();
            check_tiling(dissect(m, kLinkTypeEthernet));
        }
    }
    for (int trial = 0; trial < 500; ++trial) {
        Bytes junk(rng.uniform_index(200));
        for (auto& b : junk) b = rng.byte();
        if (junk.size() > 13 && trial % 2) {
            junk[12] = 0x08;
            junk[13] = 0x00;
            junk[14] = static_cast<std::uint8_t>(0x40 | (rng.byte() & 0x0F));
        }
        check_tiling(dissect(junk, kLinkTypeEthernet));
    }
}
