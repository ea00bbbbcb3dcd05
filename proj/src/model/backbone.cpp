#include "gds/backbone.hpp"

#include "gds/errors.hpp"

namespace gds {

namespace {

std::string stage_prefix(int stage, char layer) {
  return "backbone.s" + std::to_string(stage + 1) + layer;
}

}  // namespace

void register_backbone(ParamStore& params, const ModelConfig& config) {
  int in = 1;
  for (int s = 0; s < kPyramidLevels; ++s) {
    const int c = config.pyramid_channels[static_cast<std::size_t>(s)];
    register_conv(params, stage_prefix(s, 'a'), c, in, 3);
    register_conv(params, stage_prefix(s, 'b'), c, c, 3);
    in = c;
  }
}

FeaturePyramid backbone_forward(const Tensor& x, const ParamStore& params) {
  if (x.rank() != 4 || x.extent(1) != 1) {
    throw ShapeError("backbone: expected [B,1,H,W] input, got " + shape_str(x.shape()));
  }
  if (x.extent(2) % kInputMultiple != 0 || x.extent(3) % kInputMultiple != 0) {
    throw ShapeError("backbone: input extents " + std::to_string(x.extent(2)) + "x" +
                     std::to_string(x.extent(3)) +
                     " must be divisible by 32; pad the image to the next multiple of 32");
  }
  FeaturePyramid pyr;
  Tensor h = x;
  for (int s = 0; s < kPyramidLevels; ++s) {
    h = relu(conv_layer(h, params, stage_prefix(s, 'a'), 2, 1));
    h = relu(conv_layer(h, params, stage_prefix(s, 'b'), s == 0 ? 2 : 1, 1));
    pyr.levels[static_cast<std::size_t>(s)] = h;
  }
  return pyr;
}

}  // namespace gds
