#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sahnet/net/densenet.hpp"
#include "sahnet/train/optimizer.hpp"

namespace sahnet::train {

struct CheckpointMeta {
  std::size_t epoch = 0;
  int phase = 0;
  double lr = 0.0;
  std::string monitor;
  double best_metric = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
};

/// Manifest text plus the little-endian payload it describes. Parameters are
/// stored as float32, batch-norm buffers and optimizer moments as float64.
struct EncodedCheckpoint {
  std::string manifest;
  std::vector<std::uint8_t> blob;
};

struct Checkpoint {
  net::Model model;
  Adam optimizer;
  CheckpointMeta meta;
};

/// `optimizer` may be null, in which case no moments are written.
EncodedCheckpoint encode_checkpoint(const net::Model& model, const Adam* optimizer, const CheckpointMeta& meta);

/// Throws ManifestCorrupt, BlobLengthMismatch, UnknownTensorName.
Checkpoint decode_checkpoint(const std::string& manifest, std::span<const std::uint8_t> blob);

/// Number of tensor entries listed in a manifest.
std::size_t manifest_tensor_count(const std::string& manifest);

/// Writes <stem>.manifest and <stem>.blob.
void save_checkpoint(const std::filesystem::path& stem, const EncodedCheckpoint& encoded);
/// Accepts the stem or either file of the pair.
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::filesystem::path checkpoint_stem(const std::filesystem::path& path);

}  // namespace sahnet::train
