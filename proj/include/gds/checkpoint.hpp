#pragma once

// GDSC checkpoint container (little-endian):
//   "GDSC" | u32 version | u64 epoch | u32 len + "key=value\n"* config echo |
//   u32 count | per tensor: u32 len + name, u8 rank, u32 extents[rank],
//   f64 payload, u32 CRC of the record | u32 CRC of all preceding bytes

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gds/config.hpp"
#include "gds/trainer.hpp"

namespace gds {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  std::uint64_t epoch = 0;
  KeyValues config;
  std::vector<NamedTensor> tensors;

  // Throws MissingTensorError.
  const NamedTensor& tensor(std::string_view name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Parameters, Adam moments ("adam.m/<name>", "adam.v/<name>"), and the
// model/train configuration plus RNG and best-validation state in the echo.
Checkpoint capture(const TrainState& state);

using WarnFn = std::function<void(const std::string&)>;

// Rebuilds a model from the echoed configuration and copies every parameter.
GdsModel restore_model(const Checkpoint& ckpt);

// Full training state. When `expected` is given, echo entries that differ
// from it are reported through `warn` and the expected configuration wins.
TrainState restore_training(const Checkpoint& ckpt, const TrainConfig* expected = nullptr,
                            const WarnFn& warn = {});

}  // namespace gds
