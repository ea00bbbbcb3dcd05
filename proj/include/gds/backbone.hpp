#pragma once

// Four-stage convolutional feature pyramid with strides 4, 8, 16 and 32.

#include <array>

#include "gds/params.hpp"

namespace gds {

struct FeaturePyramid {
  std::array<Tensor, 4> levels;  // F1..F4, each [B, C_l, H/2^(l+1), W/2^(l+1)]
};

inline constexpr int kPyramidLevels = 4;
inline constexpr int kInputMultiple = 32;

void register_backbone(ParamStore& params, const ModelConfig& config);

// x: [B,1,H,W] with H and W divisible by 32. Each stage is two 3x3 conv+relu
// layers, the first with stride 2; stage 1 uses stride 2 for both to reach
// stride 4.
FeaturePyramid backbone_forward(const Tensor& x, const ParamStore& params);

}  // namespace gds
