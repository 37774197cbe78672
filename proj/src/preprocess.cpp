#include "pktcam/preprocess.hpp"

namespace pktcam {

const char* to_string(SkipReason reason) noexcept {
    switch (reason) {
    case SkipReason::NoPayloadControl: return "NoPayloadControl";
    case SkipReason::NonIp: return "NonIp";
    case SkipReason::UnsupportedLinkType: return "UnsupportedLinkType";
    }
    return "Unknown";
}

std::optional<SkipReason> skip_reason_from_string(std::string_view s) {
    if (s == "NoPayloadControl") return SkipReason::NoPayloadControl;
    if (s == "NonIp") return SkipReason::NonIp;
    if (s == "UnsupportedLinkType") return SkipReason::UnsupportedLinkType;
    return std::nullopt;
}

std::optional<SkipReason> should_skip(const DecodedPacket& pkt) {
    if (pkt.linktype != kLinkTypeEthernet) return SkipReason::UnsupportedLinkType;
    if (!pkt.ethernet || !pkt.ip) return SkipReason::NonIp;
    if (pkt.payload_span.empty()) return SkipReason::NoPayloadControl;
    return std::nullopt;
}

namespace {

class Writer {
public:
    explicit Writer(FeatureVector& v) : v_(v) {}

    bool full() const { return pos_ >= kVectorLen; }
    std::size_t pos() const { return pos_; }

    void copy(ByteView data, ByteRange range) {
        for (std::size_t o = range.begin; o < range.end && !full(); ++o) {
            v_.bytes[pos_] = data[o];
            v_.origin[pos_] = Origin{Origin::Kind::Offset, static_cast<std::uint32_t>(o)};
            ++pos_;
        }
    }

    void pad(std::size_t count) {
        for (std::size_t i = 0; i < count && !full(); ++i) {
            v_.bytes[pos_] = 0;
            v_.origin[pos_] = Origin{Origin::Kind::ZeroPad, 0};
            ++pos_;
        }
    }

private:
    FeatureVector& v_;
    std::size_t pos_ = 0;
};

} // namespace

FeatureVector vectorize(const DecodedPacket& pkt, ByteView data) {
    FeatureVector v;
    Writer w(v);

    const IpLayer& ip = *pkt.ip;
    w.copy(data, ip.span);
    // Zero the address bytes in place; the origin keeps the record offset for field mapping.
    for (const ByteRange& addr : {ip.src_span, ip.dst_span}) {
        for (std::size_t o = addr.begin; o < addr.end; ++o) {
            const std::size_t p = o - ip.span.begin;
            if (p >= kVectorLen) break;
            v.bytes[p] = 0;
            v.origin[p] = Origin{Origin::Kind::MaskedIP, static_cast<std::uint32_t>(o)};
        }
    }

    if (pkt.transport) {
        w.copy(data, pkt.transport->span);
        if (pkt.transport->kind == TransportKind::Udp) w.pad(kTransportPadLen - pkt.transport->header_len);
    }
    w.copy(data, pkt.payload_span);

    v.valid_len = w.pos();
    w.pad(kVectorLen);
    normalize(v);
    return v;
}

void normalize(FeatureVector& v) {
    for (std::size_t i = 0; i < kVectorLen; ++i) v.normalized[i] = static_cast<float>(v.bytes[i]) / 255.0f;
}

PreprocessOutcome preprocess(const DecodedPacket& pkt, ByteView data) {
    if (auto reason = should_skip(pkt)) return *reason;
    return vectorize(pkt, data);
}

} // namespace pktcam
