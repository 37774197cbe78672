#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "pktcam/bytes.hpp"
#include "pktcam/rng.hpp"

namespace test {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(PKTCAM_FIXTURE_DIR) / name; }

inline pktcam::Bytes read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return pktcam::Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline nlohmann::json expected() {
    std::ifstream in(fixture("expected.json"));
    return nlohmann::json::parse(in);
}

inline void put16(pktcam::Bytes& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

inline void put32(pktcam::Bytes& b, std::uint32_t v) {
    put16(b, static_cast<std::uint16_t>(v >> 16));
    put16(b, static_cast<std::uint16_t>(v));
}

/// Hand-assembled Ethernet/IPv4 frame; `transport` is either a UDP (8) or TCP (>=20) header.
struct FrameSpec {
    std::uint8_t protocol = 6; // 6 TCP, 17 UDP
    std::size_t ip_options = 0; // multiple of 4
    std::size_t tcp_options = 0; // multiple of 4
    std::size_t payload = 0;
    std::size_t trailer = 0;
    std::uint32_t src = 0xC0A80001;
    std::uint32_t dst = 0x0A000002;
    std::uint16_t sport = 40000;
    std::uint16_t dport = 80;
    std::uint8_t tcp_flags = 0x18;
};

inline pktcam::Bytes build_frame(const FrameSpec& s, pktcam::Rng& rng) {
    pktcam::Bytes b;
    for (int i = 0; i < 12; ++i) b.push_back(rng.byte());
    put16(b, 0x0800);
    const std::size_t ihl = 20 + s.ip_options;
    const std::size_t th = s.protocol == 17 ? 8 : 20 + s.tcp_options;
    const std::size_t total = ihl + th + s.payload;
    b.push_back(static_cast<std::uint8_t>(0x40 | (ihl / 4)));
    b.push_back(0);
    put16(b, static_cast<std::uint16_t>(total));
    put16(b, static_cast<std::uint16_t>(rng.next_u64()));
    put16(b, 0x4000);
    b.push_back(64);
    b.push_back(s.protocol);
    put16(b, 0);
    put32(b, s.src);
    put32(b, s.dst);
    for (std::size_t i = 0; i < s.ip_options; ++i) b.push_back(1); // NOP
    put16(b, s.sport);
    put16(b, s.dport);
    if (s.protocol == 17) {
        put16(b, static_cast<std::uint16_t>(8 + s.payload));
        put16(b, 0);
    } else {
        put32(b, static_cast<std::uint32_t>(rng.next_u64()));
        put32(b, static_cast<std::uint32_t>(rng.next_u64()));
        b.push_back(static_cast<std::uint8_t>((th / 4) << 4));
        b.push_back(s.tcp_flags);
        put16(b, 64240);
        put16(b, 0);
        put16(b, 0);
        for (std::size_t i = 0; i < s.tcp_options; ++i) b.push_back(1);
    }
    for (std::size_t i = 0; i < s.payload; ++i) b.push_back(rng.byte());
    for (std::size_t i = 0; i < s.trailer; ++i) b.push_back(0);
    return b;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("pktcam_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace test
