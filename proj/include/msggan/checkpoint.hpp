#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msggan/training.hpp"

namespace msggan {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

/// Layout: 8-byte magic "MSGGANCK", u32 format version, u64 manifest length,
/// the JSON manifest, then the raw little-endian float32 blocks in manifest
/// order. The manifest holds the configuration and its hash, the resolved
/// architecture, the counters and an index of {name, shape, offset}.
std::vector<uint8_t> serialize_checkpoint(const TrainingState& state);
TrainingState deserialize_checkpoint(const std::vector<uint8_t>& bytes);

/// Written through a temporary file and renamed into place.
void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);
/// Throws CheckpointVersionError for another format version.
TrainingState load_checkpoint(const std::filesystem::path& path);

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace msggan
