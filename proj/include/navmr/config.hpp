#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "navmr/model.hpp"
#include "navmr/synth.hpp"
#include "navmr/train.hpp"

namespace navmr {

// Run configuration file: {"train": {...}, "weights": {...}, "model": {...}}.
// Every section and key is optional; unknown keys are rejected by name.
struct RunConfig {
  TrainConfig train;
  ModelConfig model;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig parse_model_config(const nlohmann::json& j);
nlohmann::json to_json(const LossWeights& weights);
// "preset" ("qvhighlights" or "charades") picks the base values that the
// remaining keys override.
LossWeights parse_loss_weights(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
nlohmann::json to_json(const SyntheticSpec& spec);

// Seed precedence: command-line flag, then NAVMR_SEED, then the config value.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed);

}  // namespace navmr
