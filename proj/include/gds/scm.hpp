#pragma once

// Signature-conditioned decoding: the signature is tiled over every pyramid
// level, gated by a per-level attention map, fused on the stride-4 grid and
// decoded to logits at input resolution.

#include <vector>

#include "gds/backbone.hpp"
#include "gds/esg.hpp"
#include "gds/grid.hpp"

namespace gds {

void register_scm(ParamStore& params, const ModelConfig& config);

// e [B,D] -> [B,D,h,w] with every spatial position holding e.
Tensor tile_signature(const Tensor& e, int h, int w);

// 1x1 conv -> relu -> 1x1 conv -> sigmoid over combined [B, C_l + D, h, w],
// with the parameters of pyramid level `level` (0-based).
Tensor attention(const Tensor& combined, const ParamStore& params, int level);

// Hidden width of the level attention gate.
int attention_hidden(int combined_channels);

// Returns logits [B,1,H,W] for the image extents H x W.
Tensor fuse_decode(const FeaturePyramid& pyramid, const Tensor& e, const ParamStore& params,
                   int height, int width, bool use_attention = true);

// All trainable parameters plus the configuration that shaped them.
struct GdsModel {
  ModelConfig config;
  ParamStore params;
};

GdsModel make_model(const ModelConfig& config, Rng& rng);

struct PanelResult {
  std::vector<ImageGrid> hypotheses;
  ImageGrid consensus;
  ImageGrid dispersion;  // population standard deviation over hypotheses
  std::vector<ExpertSignature> signatures;
};

// Image [1,1,H,W]; draws M signatures from the image-only prior and decodes
// each one. The pyramid and prior are evaluated once.
PanelResult sample_panel(const Tensor& x, int m, Rng& rng, const GdsModel& model);

// Mean and population standard deviation of a stack of maps.
void panel_statistics(PanelResult& panel);

}  // namespace gds
