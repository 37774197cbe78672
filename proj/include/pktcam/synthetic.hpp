#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pktcam/manifest.hpp"
#include "pktcam/pcap.hpp"

namespace pktcam {

/// A 4-byte pattern written at a fixed feature-vector offset of every packet of one class.
struct Signature {
    std::string class_name;
    std::size_t vector_offset = 0;
    std::array<std::uint8_t, 4> bytes{};
};

enum class PayloadAlphabet { Printable, Uniform };

/**
 * Ethernet/IPv4/TCP packets (20-byte IP and TCP headers, PSH+ACK) with random
 * addresses, ports, sequence numbers and payload. The feature-vector layout
 * puts the TCP ports at offsets 20..23 and the payload from offset 40, so a
 * signature at offset 20 replaces both ports and one at offset >= 40 sits in
 * the payload.
 */
struct SyntheticSpec {
    std::vector<Signature> signatures = default_signatures();
    std::size_t packets_per_class = 1000;
    std::size_t min_payload = 200;
    std::size_t max_payload = 1200;
    /// Printable draws payload bytes from 0x20..0x7E, Uniform from the full byte range.
    PayloadAlphabet alphabet = PayloadAlphabet::Printable;
    std::uint64_t seed = 1;

    /// Four classes: one in the port bytes, three at different payload offsets.
    static std::vector<Signature> default_signatures();
};

inline constexpr std::size_t kSyntheticPortOffset = 20;

std::vector<PacketRecord> synthesize_class(const SyntheticSpec& spec, std::size_t class_index);

/// Writes one capture per class and labels.csv into dir.
Manifest write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir);

} // namespace pktcam
