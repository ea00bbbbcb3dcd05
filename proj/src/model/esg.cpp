#include "gds/esg.hpp"

#include "gds/errors.hpp"

namespace gds {

namespace {

constexpr int kStemChannels[2] = {16, 32};

GaussianParams heads(const Tensor& features, const ParamStore& params, const std::string& prefix) {
  Tensor pooled = mean(features, {2, 3});
  return {dense_layer(pooled, params, prefix + ".mu"),
          clamp(dense_layer(pooled, params, prefix + ".logvar"), kLogVarMin, kLogVarMax)};
}

}  // namespace

void register_esg(ParamStore& params, const ModelConfig& config) {
  const int n = config.num_annotators;
  const int hid = config.embed_hidden;
  const int c = config.embed_channels;
  const int d = config.signature_dim;

  register_conv(params, "esg.prior.c1", kStemChannels[0], 1, 3);
  register_conv(params, "esg.prior.c2", kStemChannels[1], kStemChannels[0], 3);
  register_conv(params, "esg.prior.c3", c, kStemChannels[1], 3);
  register_conv(params, "esg.prior.c4", c, c, 3);
  register_dense(params, "esg.prior.mu", c, d);
  register_dense(params, "esg.prior.logvar", c, d);

  register_conv(params, "esg.post.c1", kStemChannels[0], 2, 3);
  register_conv(params, "esg.post.c2", kStemChannels[1], kStemChannels[0], 3);
  register_conv(params, "esg.post.c3", c, kStemChannels[1], 3);
  register_conv(params, "esg.post.c4", c, c, 3);
  register_dense(params, "esg.post.mu", c, d);
  register_dense(params, "esg.post.logvar", c, d);

  register_dense(params, "esg.embed.l1", n, hid);
  register_dense(params, "esg.embed.l2", n + hid, hid);
  register_dense(params, "esg.embed.l3", n + 2 * hid, c);
}

Tensor one_hot(const std::vector<int>& indices, int num_annotators) {
  std::vector<double> v(indices.size() * static_cast<std::size_t>(num_annotators), 0.0);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] < 0 || indices[b] >= num_annotators) {
      throw ParameterError("one_hot: annotator index " + std::to_string(indices[b]) +
                           " outside [0, " + std::to_string(num_annotators) + ")");
    }
    v[b * static_cast<std::size_t>(num_annotators) + static_cast<std::size_t>(indices[b])] = 1.0;
  }
  return Tensor::from_values({static_cast<int>(indices.size()), num_annotators}, std::move(v));
}

AnnotatorEmbedding embed_annotator(const Tensor& one_hot_rows, const ParamStore& params) {
  if (one_hot_rows.rank() != 2) {
    throw ShapeError("embed_annotator: expected [B,N] one-hot rows, got " +
                     shape_str(one_hot_rows.shape()));
  }
  const int n = one_hot_rows.extent(1);
  if (params.at("esg.embed.l1.w").extent(0) != n) {
    throw ShapeError("embed_annotator: model expects " +
                     std::to_string(params.at("esg.embed.l1.w").extent(0)) + " annotators, got " +
                     std::to_string(n));
  }
  auto v = one_hot_rows.values();
  for (int b = 0; b < one_hot_rows.extent(0); ++b) {
    int ones = 0, others = 0;
    for (int i = 0; i < n; ++i) {
      const double x = v[static_cast<std::size_t>(b * n + i)];
      ones += x == 1.0;
      others += x != 0.0 && x != 1.0;
    }
    if (ones != 1 || others != 0) {
      throw ContractError("embed_annotator: row " + std::to_string(b) + " is not a one-hot vector");
    }
  }
  Tensor h1 = relu(dense_layer(one_hot_rows, params, "esg.embed.l1"));
  Tensor h2 = relu(dense_layer(concat({one_hot_rows, h1}, 1), params, "esg.embed.l2"));
  Tensor g = add_scalar(dense_layer(concat({one_hot_rows, h1, h2}, 1), params, "esg.embed.l3"), 1.0);
  return {g};
}

Tensor modulate(const Tensor& features, const AnnotatorEmbedding& g) {
  if (features.rank() != 4 || g.g.rank() != 2 || g.g.extent(1) != features.extent(1) ||
      (g.g.extent(0) != features.extent(0) && g.g.extent(0) != 1)) {
    throw ShapeError("modulate: embedding " + shape_str(g.g.shape()) +
                     " does not match feature channels of " + shape_str(features.shape()));
  }
  return mul(features, reshape(g.g, {g.g.extent(0), g.g.extent(1), 1, 1}));
}

GaussianParams prior_forward(const Tensor& x, const ParamStore& params) {
  if (x.rank() != 4 || x.extent(1) != 1) {
    throw ShapeError("prior_forward: expected [B,1,H,W] image, got " + shape_str(x.shape()));
  }
  Tensor h = x;
  for (const char* layer : {"esg.prior.c1", "esg.prior.c2", "esg.prior.c3", "esg.prior.c4"}) {
    h = relu(conv_layer(h, params, layer, 2, 1));
  }
  return heads(h, params, "esg.prior");
}

GaussianParams posterior_forward(const Tensor& x, const Tensor& y, const Tensor& one_hot_rows,
                                 const ParamStore& params) {
  if (x.rank() != 4 || y.rank() != 4 || x.extent(1) != 1 || y.extent(1) != 1 ||
      x.shape() != y.shape()) {
    throw ShapeError("posterior_forward: image " + shape_str(x.shape()) + " and annotation " +
                     shape_str(y.shape()) + " must both be [B,1,H,W] with equal extents");
  }
  if (one_hot_rows.rank() != 2 || one_hot_rows.extent(0) != x.extent(0)) {
    throw ShapeError("posterior_forward: need one annotator row per image, got " +
                     shape_str(one_hot_rows.shape()));
  }
  Tensor h = concat({x, y}, 1);
  for (const char* layer : {"esg.post.c1", "esg.post.c2", "esg.post.c3"}) {
    h = relu(conv_layer(h, params, layer, 2, 1));
  }
  h = modulate(h, embed_annotator(one_hot_rows, params));
  h = relu(conv_layer(h, params, "esg.post.c4", 2, 1));
  return heads(h, params, "esg.post");
}

ExpertSignature sample_signature(const GaussianParams& q, Rng& rng, SignatureSource source) {
  if (q.mu.shape() != q.log_var.shape()) {
    throw ShapeError("sample_signature: mu " + shape_str(q.mu.shape()) + " vs log_var " +
                     shape_str(q.log_var.shape()));
  }
  std::vector<double> eps(q.mu.numel());
  for (auto& v : eps) v = rng.normal();
  Tensor noise = Tensor::from_values(q.mu.shape(), std::move(eps));
  return {add(q.mu, mul(exp(mul_scalar(q.log_var, 0.5)), noise)), source, {}};
}

Tensor kl_divergence(const GaussianParams& q, const GaussianParams& p) {
  if (q.mu.shape() != p.mu.shape() || q.log_var.shape() != p.log_var.shape() ||
      q.mu.shape() != q.log_var.shape()) {
    throw ShapeError("kl_divergence: dimension mismatch between " + shape_str(q.mu.shape()) +
                     " and " + shape_str(p.mu.shape()));
  }
  Tensor diff = sub(p.mu, q.mu);
  Tensor ratio = exp(sub(q.log_var, p.log_var));
  Tensor mahal = mul(mul(diff, diff), exp(mul_scalar(p.log_var, -1.0)));
  Tensor terms = add(add_scalar(add(ratio, mahal), -1.0), sub(p.log_var, q.log_var));
  return mul_scalar(sum(terms, {1}), 0.5);
}

}  // namespace gds
