#include "pktcam/synthetic.hpp"

#include <algorithm>

#include "pktcam/error.hpp"
#include "pktcam/rng.hpp"

namespace pktcam {

namespace {

constexpr std::size_t kEthLen = 14;
constexpr std::size_t kIpLen = 20;
constexpr std::size_t kTcpLen = 20;
constexpr std::size_t kPayloadVectorOffset = kIpLen + kTcpLen;

void put16(Bytes& b, std::uint16_t v) { store16(b, v, ByteOrder::Big); }
void put32(Bytes& b, std::uint32_t v) { store32(b, v, ByteOrder::Big); }

std::uint16_t ip_checksum(const std::uint8_t* h, std::size_t len) {
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) sum += static_cast<std::uint32_t>((h[i] << 8) | h[i + 1]);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

Bytes make_frame(Rng& rng, std::size_t payload_len, PayloadAlphabet alphabet) {
    Bytes b;
    b.reserve(kEthLen + kIpLen + kTcpLen + payload_len);
    for (int i = 0; i < 12; ++i) b.push_back(rng.byte());
    b[0] &= 0xFE; // unicast destination
    b[6] &= 0xFE;
    put16(b, 0x0800);

    const std::size_t ip = b.size();
    b.push_back(0x45);
    b.push_back(0);
    put16(b, static_cast<std::uint16_t>(kIpLen + kTcpLen + payload_len));
    put16(b, static_cast<std::uint16_t>(rng.next_u64()));
    put16(b, 0x4000);
    b.push_back(static_cast<std::uint8_t>(32 + rng.uniform_index(97)));
    b.push_back(6);
    put16(b, 0);
    put32(b, static_cast<std::uint32_t>(rng.next_u64()));
    put32(b, static_cast<std::uint32_t>(rng.next_u64()));
    const std::uint16_t csum = ip_checksum(b.data() + ip, kIpLen);
    b[ip + 10] = static_cast<std::uint8_t>(csum >> 8);
    b[ip + 11] = static_cast<std::uint8_t>(csum);

    put16(b, static_cast<std::uint16_t>(1024 + rng.uniform_index(64512)));
    put16(b, static_cast<std::uint16_t>(1024 + rng.uniform_index(64512)));
    put32(b, static_cast<std::uint32_t>(rng.next_u64()));
    put32(b, static_cast<std::uint32_t>(rng.next_u64()));
    b.push_back(0x50);
    b.push_back(0x18); // PSH, ACK
    put16(b, static_cast<std::uint16_t>(rng.next_u64()));
    put16(b, static_cast<std::uint16_t>(rng.next_u64()));
    put16(b, 0);

    for (std::size_t i = 0; i < payload_len; ++i) {
        b.push_back(alphabet == PayloadAlphabet::Uniform ? rng.byte()
                                                         : static_cast<std::uint8_t>(0x20 + rng.uniform_index(95)));
    }
    return b;
}

} // namespace

std::vector<Signature> SyntheticSpec::default_signatures() {
    return {
        {"ports", kSyntheticPortOffset, {0xFF, 0x00, 0xFF, 0x00}},
        {"sig64", 64, {0xFF, 0xFF, 0xFF, 0xFF}},
        {"sig112", 112, {0x00, 0xFF, 0xFF, 0x00}},
        {"sig160", 160, {0xFF, 0x00, 0x00, 0xFF}},
    };
}

std::vector<PacketRecord> synthesize_class(const SyntheticSpec& spec, std::size_t class_index) {
    if (class_index >= spec.signatures.size()) throw DataError("class index out of range");
    if (spec.min_payload > spec.max_payload) throw DataError("min_payload exceeds max_payload");
    const Signature& sig = spec.signatures[class_index];
    const bool in_ports = sig.vector_offset == kSyntheticPortOffset;
    if (!in_ports && sig.vector_offset < kPayloadVectorOffset) {
        throw DataError("signature offset must be the port offset or inside the payload");
    }
    if (!in_ports && sig.vector_offset + sig.bytes.size() > kPayloadVectorOffset + spec.min_payload) {
        throw DataError("signature does not fit in the minimum payload");
    }

    Rng rng(spec.seed * 0x100000001B3ull + class_index);
    std::vector<PacketRecord> out;
    out.reserve(spec.packets_per_class);
    const std::uint32_t base = 1'700'000'000 + static_cast<std::uint32_t>(class_index) * 100'000;
    for (std::size_t i = 0; i < spec.packets_per_class; ++i) {
        const std::size_t len = spec.min_payload + rng.uniform_index(spec.max_payload - spec.min_payload + 1);
        Bytes frame = make_frame(rng, len, spec.alphabet);
        // Vector offsets count from the IP header, which follows the 14-byte Ethernet header.
        std::copy(sig.bytes.begin(), sig.bytes.end(), frame.begin() + static_cast<std::ptrdiff_t>(kEthLen + sig.vector_offset));
        PacketRecord r;
        r.ts_seconds = base + static_cast<std::uint32_t>(i / 10);
        r.ts_subseconds = static_cast<std::uint32_t>((i % 10) * 100'000);
        r.captured_len = static_cast<std::uint32_t>(frame.size());
        r.original_len = r.captured_len;
        r.data = std::move(frame);
        out.push_back(std::move(r));
    }
    return out;
}

Manifest write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    Manifest m;
    m.root = dir;
    GlobalHeader header;
    for (std::size_t c = 0; c < spec.signatures.size(); ++c) {
        const std::string file = spec.signatures[c].class_name + ".pcap";
        write_pcap_file(dir / file, header, synthesize_class(spec, c));
        m.entries.push_back({file, spec.signatures[c].class_name});
        m.class_names.push_back(spec.signatures[c].class_name);
    }
    std::sort(m.class_names.begin(), m.class_names.end());
    write_manifest(m);
    return m;
}

} // namespace pktcam
