#pragma once

// Flat key=value configuration with [data], [model], [train] and [eval]
// sections. A top-level `seed` may precede the first section.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gds/synth.hpp"
#include "gds/trainer.hpp"

namespace gds {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct EvalConfig {
  int panel_size = 8;
  double entropy_threshold = 0.0;
  int roi_radius = 5;
  Split split = Split::kTest;

  bool operator==(const EvalConfig&) const = default;
};

struct AppConfig {
  std::uint64_t seed = 0;
  DatasetConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
};

// Sets one dotted key ("train.lr", "data.offsets", "seed"). Throws
// ConfigError naming the key for unknown keys and malformed values.
void apply_setting(AppConfig& config, const std::string& key, const std::string& value);

AppConfig parse_config(std::string_view text);
AppConfig load_config(const std::filesystem::path& path);

// Every user-settable key with its current value, in documentation order.
KeyValues settings_of(const AppConfig& config);

// Checkpoint echo of the model and optimizer configuration.
KeyValues model_echo(const ModelConfig& config);
KeyValues train_echo(const TrainConfig& config);
ModelConfig model_from_echo(const KeyValues& echo);
TrainConfig train_from_echo(const KeyValues& echo);

const std::string* find_value(const KeyValues& kv, std::string_view key);

// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& key, const std::string& text);
std::int64_t parse_int(const std::string& key, const std::string& text);
std::uint64_t parse_u64(const std::string& key, const std::string& text);

}  // namespace gds
