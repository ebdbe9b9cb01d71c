#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vvs/model.hpp"
#include "vvs/trainer.hpp"

namespace vvs {

struct CheckpointMeta {
  TrainConfig config;
  int epoch = 0;
  std::uint64_t step = 0;
};

// Binary layout: 8-byte magic "VVSCKPT1", uint64 LE header length, JSON
// header (format version, configs, epoch/step, tensor table), then every
// tensor as float32 LE in table order.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Loads weights into an existing model; throws ConfigError when the stored
// architecture differs from the model's.
CheckpointMeta load_weights(const std::filesystem::path& path, Model<float>& model);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace vvs
