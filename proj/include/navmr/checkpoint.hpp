#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "navmr/model.hpp"

namespace navmr {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  CheckpointMeta meta;
};

// One JSON header line (model config, tensor names and shapes, blob size),
// then the parameters as little-endian float64 in tensor order.
std::string encode_checkpoint(const ModelParams& params, const ModelConfig& model, const CheckpointMeta& meta = {});
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

// Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& model,
                     const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also checks every tensor shape against `expected`; a mismatch names the
// tensor.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace navmr
