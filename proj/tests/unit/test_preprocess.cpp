#include <doctest.h>

#include "pktcam/preprocess.hpp"
#include "support.hpp"

using namespace pktcam;

namespace {

struct Packet {
    Bytes data;
    DecodedPacket pkt;
};

Packet load(const std::string& name) {
    const PcapFile f = read_pcap_file(test::fixture(name + ".pcap"));
    return {f.records[0].data, dissect(f.records[0], f.header.linktype)};
}

Packet build(const test::FrameSpec& s, std::uint64_t seed = 1) {
    Rng rng(seed);
    Bytes d = test::build_frame(s, rng);
    DecodedPacket p = dissect(d, kLinkTypeEthernet);
    return {std::move(d), std::move(p)};
}

} // namespace

TEST_CASE("skip rules") {
    CHECK(should_skip(load("tcp_syn").pkt) == SkipReason::NoPayloadControl);
    CHECK(should_skip(load("padded_syn").pkt) == SkipReason::NoPayloadControl);
    CHECK(should_skip(load("arp").pkt) == SkipReason::NonIp);
    CHECK_FALSE(should_skip(load("tcp_one_byte").pkt));
    CHECK_FALSE(should_skip(load("dns_query").pkt));

    const Packet p = build({});
    DecodedPacket other = dissect(p.data, 101);
    CHECK(should_skip(other) == SkipReason::UnsupportedLinkType);
    CHECK(std::holds_alternative<SkipReason>(preprocess(other, p.data)));
}

TEST_CASE("skip reason names round trip") {
    for (SkipReason r : {SkipReason::NoPayloadControl, SkipReason::NonIp, SkipReason::UnsupportedLinkType}) {
        CHECK(skip_reason_from_string(to_string(r)) == r);
    }
    CHECK_FALSE(skip_reason_from_string("bogus"));
}

TEST_CASE("IPv4/UDP layout with transport padding") {
    test::FrameSpec s;
    s.protocol = 17;
    s.payload = 100;
    const Packet p = build(s);
    const FeatureVector v = vectorize(p.pkt, p.data);
    CHECK(v.valid_len == 140);
    for (std::size_t i = 0; i < 20; ++i) CHECK(v.origin[i].offset == 14 + i);
    for (std::size_t i = 20; i < 28; ++i) {
        CHECK(v.origin[i].kind == Origin::Kind::Offset);
        CHECK(v.bytes[i] == p.data[14 + i]);
    }
    for (std::size_t i = 28; i < 40; ++i) {
        CHECK(v.origin[i].kind == Origin::Kind::ZeroPad);
        CHECK(v.bytes[i] == 0);
    }
    for (std::size_t i = 40; i < 140; ++i) CHECK(v.bytes[i] == p.data[14 + 28 + (i - 40)]);
    for (std::size_t i = 140; i < kVectorLen; ++i) {
        CHECK(v.bytes[i] == 0);
        CHECK(v.origin[i].kind == Origin::Kind::ZeroPad);
    }
}

TEST_CASE("long payload is truncated") {
    test::FrameSpec s;
    s.payload = 4000;
    const Packet p = build(s);
    const FeatureVector v = vectorize(p.pkt, p.data);
    CHECK(v.valid_len == kVectorLen);
    CHECK(v.bytes[kVectorLen - 1] == p.data[14 + kVectorLen - 1]);
}

TEST_CASE("source address is masked") {
    const Packet p = build({.payload = 10});
    const FeatureVector v = vectorize(p.pkt, p.data);
    const FieldSpan* src = p.pkt.field("ip.src");
    REQUIRE(src);
    int masked = 0;
    for (std::size_t i = 0; i < kVectorLen; ++i) {
        if (v.origin[i].kind == Origin::Kind::MaskedIP && src->range.contains(v.origin[i].offset)) {
            CHECK(v.bytes[i] == 0);
            ++masked;
        }
    }
    CHECK(masked == 4);
    CHECK(p.data[src->range.begin] == 192);
}

TEST_CASE("Ethernet trailer is dropped") {
    const Packet p = build({.payload = 6, .trailer = 8});
    const FeatureVector v = vectorize(p.pkt, p.data);
    CHECK(v.valid_len == 46);
}

TEST_CASE("IPv6 masks sixteen bytes per address") {
    const Packet p = load("ipv6_tcp");
    const FeatureVector v = vectorize(p.pkt, p.data);
    int masked = 0;
    for (const auto& o : v.origin) masked += o.kind == Origin::Kind::MaskedIP;
    CHECK(masked == 32);
    CHECK(v.valid_len == 40 + 20 + 8);
}

TEST_CASE("IP without a transport keeps header and payload") {
    test::FrameSpec s;
    s.protocol = 1;
    s.payload = 0;
    Packet p = build(s);
    // build_frame appends a TCP header for non-UDP protocols; as ICMP it is payload.
    CHECK_FALSE(p.pkt.transport);
    const FeatureVector v = vectorize(p.pkt, p.data);
    CHECK(v.valid_len == 40);
}

TEST_CASE("fuzzed packets keep every layout invariant") {
    Rng rng(2024);
    int vectorized = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        test::FrameSpec s;
        s.protocol = rng.uniform_index(2) ? 6 : 17;
        s.ip_options = 4 * rng.uniform_index(11);
        s.tcp_options = 4 * rng.uniform_index(11);
        s.payload = rng.uniform_index(2000);
        s.trailer = rng.uniform_index(3) == 0 ? rng.uniform_index(20) : 0;
        s.src = static_cast<std::uint32_t>(rng.next_u64());
        s.dst = static_cast<std::uint32_t>(rng.next_u64());
        const Packet p = build(s, rng.next_u64());
        const auto outcome = preprocess(p.pkt, p.data);
        if (s.payload == 0) {
            CHECK(std::get<SkipReason>(outcome) == SkipReason::NoPayloadControl);
            continue;
        }
        REQUIRE(std::holds_alternative<FeatureVector>(outcome));
        const FeatureVector& v = std::get<FeatureVector>(outcome);
        ++vectorized;

        const std::size_t th = s.protocol == 17 ? 20 : 20 + s.tcp_options;
        CHECK(v.valid_len == std::min(kVectorLen, 20 + s.ip_options + th + s.payload));
        std::int64_t last_offset = -1;
        for (std::size_t i = 0; i < kVectorLen; ++i) {
            CHECK(v.normalized[i] == static_cast<float>(v.bytes[i]) / 255.0f);
            const Origin& o = v.origin[i];
            switch (o.kind) {
            case Origin::Kind::Offset:
                REQUIRE(i < v.valid_len);
                CHECK(v.bytes[i] == p.data[o.offset]);
                CHECK(static_cast<std::int64_t>(o.offset) > last_offset);
                CHECK_FALSE(p.pkt.ip->src_span.contains(o.offset));
                CHECK_FALSE(p.pkt.ip->dst_span.contains(o.offset));
                CHECK(o.offset >= 14);
                CHECK(o.offset < p.pkt.trailer_span.begin);
                last_offset = o.offset;
                break;
            case Origin::Kind::MaskedIP:
                CHECK(v.bytes[i] == 0);
                CHECK((p.pkt.ip->src_span.contains(o.offset) || p.pkt.ip->dst_span.contains(o.offset)));
                last_offset = o.offset;
                break;
            case Origin::Kind::ZeroPad:
                CHECK(v.bytes[i] == 0);
                if (i < v.valid_len) {
                    // Only the UDP header pad sits inside the valid region.
                    CHECK(s.protocol == 17);
                    CHECK(i >= 20 + s.ip_options + 8);
                    CHECK(i < 20 + s.ip_options + 20);
                }
                break;
            }
        }
    }
    CHECK(vectorized > 900);
}
