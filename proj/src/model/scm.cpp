#include "gds/scm.hpp"

#include <algorithm>
#include <cmath>

#include "gds/errors.hpp"

namespace gds {

namespace {

std::string att_prefix(int level, int layer) {
  return "scm.att" + std::to_string(level + 1) + ".c" + std::to_string(layer);
}

}  // namespace

int attention_hidden(int combined_channels) { return std::max(8, (combined_channels + 1) / 2); }

void register_scm(ParamStore& params, const ModelConfig& config) {
  int fused = 0;
  for (int l = 0; l < kPyramidLevels; ++l) {
    const int c = config.pyramid_channels[static_cast<std::size_t>(l)] + config.signature_dim;
    const int hid = attention_hidden(c);
    register_conv(params, att_prefix(l, 1), hid, c, 1);
    register_conv(params, att_prefix(l, 2), c, hid, 1);
    fused += c;
  }
  register_conv(params, "scm.dec.c1", config.decoder_channels, fused, 3);
  register_conv(params, "scm.dec.c2", 1, config.decoder_channels, 1);
}

Tensor tile_signature(const Tensor& e, int h, int w) {
  if (e.rank() != 2) throw ShapeError("tile_signature: expected [B,D] signature, got " + shape_str(e.shape()));
  if (h < 1 || w < 1) throw ShapeError("tile_signature: spatial extents must be >= 1");
  const int b = e.extent(0), d = e.extent(1);
  return expand(reshape(e, {b, d, 1, 1}), {b, d, h, w});
}

Tensor attention(const Tensor& combined, const ParamStore& params, int level) {
  const Tensor& w1 = params.at(att_prefix(level, 1) + ".w");
  if (combined.rank() != 4 || combined.extent(1) != w1.extent(1)) {
    throw ShapeError("attention: level " + std::to_string(level + 1) + " expects " +
                     std::to_string(w1.extent(1)) + " channels, got " + shape_str(combined.shape()));
  }
  Tensor h = relu(conv_layer(combined, params, att_prefix(level, 1), 1, 0));
  return sigmoid(conv_layer(h, params, att_prefix(level, 2), 1, 0));
}

Tensor fuse_decode(const FeaturePyramid& pyramid, const Tensor& e, const ParamStore& params,
                   int height, int width, bool use_attention) {
  const Tensor& f1 = pyramid.levels[0];
  const int gh = f1.extent(2), gw = f1.extent(3);
  std::vector<Tensor> parts;
  for (int l = 0; l < kPyramidLevels; ++l) {
    const Tensor& f = pyramid.levels[static_cast<std::size_t>(l)];
    if (f.extent(0) != e.extent(0)) {
      throw ShapeError("fuse_decode: pyramid batch " + std::to_string(f.extent(0)) +
                       " vs signature batch " + std::to_string(e.extent(0)));
    }
    Tensor combined = concat({tile_signature(e, f.extent(2), f.extent(3)), f}, 1);
    if (use_attention) {
      combined = mul(attention(combined, params, l), combined);
    }
    parts.push_back(resample(combined, gh, gw, ResampleMode::kBilinear));
  }
  Tensor h = relu(conv_layer(concat(parts, 1), params, "scm.dec.c1", 1, 1));
  Tensor logits = conv_layer(h, params, "scm.dec.c2", 1, 0);
  return resample(logits, height, width, ResampleMode::kBilinear);
}

GdsModel make_model(const ModelConfig& config, Rng& rng) {
  if (config.num_annotators < 1 || config.signature_dim < 1 || config.embed_channels < 1 ||
      config.embed_hidden < 1 || config.decoder_channels < 1) {
    throw ConfigError("model", "model widths and annotator count must be positive");
  }
  for (int c : config.pyramid_channels) {
    if (c < 1) throw ConfigError("model.pyramid_channels", "pyramid channels must be positive");
  }
  GdsModel model{config, {}};
  register_backbone(model.params, config);
  register_esg(model.params, config);
  register_scm(model.params, config);
  init_params(model.params, rng);
  return model;
}

void panel_statistics(PanelResult& panel) {
  const auto& first = panel.hypotheses.front();
  const double m = static_cast<double>(panel.hypotheses.size());
  panel.consensus = ImageGrid(first.height, first.width, 0.0);
  panel.dispersion = ImageGrid(first.height, first.width, 0.0);
  for (std::size_t i = 0; i < first.size(); ++i) {
    double s = 0.0;
    for (const auto& h : panel.hypotheses) s += h.data[i];
    const double mu = s / m;
    double v = 0.0;
    for (const auto& h : panel.hypotheses) v += (h.data[i] - mu) * (h.data[i] - mu);
    panel.consensus.data[i] = mu;
    panel.dispersion.data[i] = std::sqrt(v / m);
  }
}

PanelResult sample_panel(const Tensor& x, int m, Rng& rng, const GdsModel& model) {
  if (m < 1) throw ParameterError("sample_panel: panel size must be >= 1, got " + std::to_string(m));
  if (x.rank() != 4 || x.extent(0) != 1) {
    throw ShapeError("sample_panel: expected a single [1,1,H,W] image, got " + shape_str(x.shape()));
  }
  NoGradGuard no_grad;
  const int h = x.extent(2), w = x.extent(3);
  const FeaturePyramid pyramid = backbone_forward(x, model.params);
  const GaussianParams prior = prior_forward(x, model.params);
  PanelResult panel;
  for (int k = 0; k < m; ++k) {
    ExpertSignature sig = sample_signature(prior, rng, SignatureSource::kPrior);
    Tensor logits = fuse_decode(pyramid, sig.e, model.params, h, w, model.config.use_attention);
    ImageGrid prob(h, w);
    auto v = logits.values();
    for (std::size_t i = 0; i < prob.size(); ++i) prob.data[i] = stable_sigmoid(v[i]);
    panel.hypotheses.push_back(std::move(prob));
    panel.signatures.push_back(std::move(sig));
  }
  panel_statistics(panel);
  return panel;
}

}  // namespace gds
