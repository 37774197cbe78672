#pragma once

#include <cstdint>
#include <filesystem>

#include "pktcam/bytes.hpp"
#include "pktcam/nn/model.hpp"

namespace pktcam::nn {

/**
 * Model container, all integers little-endian:
 *
 *   "PKTCAMMD"           8-byte magic
 *   u32 format version   kModelFormatVersion
 *   u32 header length    bytes of JSON that follow
 *   JSON header          config, class names, tensor table (name + shape)
 *   f32 tensors          in tensor-table order
 *   u32 CRC-32           over every preceding byte
 */
inline constexpr std::uint32_t kModelFormatVersion = 1;

Bytes serialize_model(const CnnModel<float>& model);
/// Throws ModelFormatError (BadMagic, VersionMismatch, ChecksumMismatch, Malformed).
CnnModel<float> deserialize_model(ByteView bytes);

void save_model(const CnnModel<float>& model, const std::filesystem::path& path);
CnnModel<float> load_model(const std::filesystem::path& path);

} // namespace pktcam::nn
