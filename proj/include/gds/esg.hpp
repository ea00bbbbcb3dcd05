#pragma once

// Expert signature generator: image-only prior and annotator-conditioned
// posterior over a low-dimensional signature space, reparameterized sampling
// and the closed-form Gaussian KL.

#include <vector>

#include "gds/params.hpp"
#include "gds/rng.hpp"

namespace gds {

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;

// Diagonal Gaussian; mu and log_var are [B, D].
struct GaussianParams {
  Tensor mu;
  Tensor log_var;

  int batch() const { return mu.extent(0); }
  int dim() const { return mu.extent(1); }
};

enum class SignatureSource { kPrior, kPosterior };

struct ExpertSignature {
  Tensor e;  // [B, D]
  SignatureSource source = SignatureSource::kPrior;
  std::vector<int> annotator_ids;  // one per row for posterior draws, empty for prior draws
};

// Style modulator g, [B, C].
struct AnnotatorEmbedding {
  Tensor g;
};

void register_esg(ParamStore& params, const ModelConfig& config);

// Rows of a [B, N] one-hot matrix for the given annotator indices.
Tensor one_hot(const std::vector<int>& indices, int num_annotators);

// Three-layer densely connected encoder (each layer sees the one-hot input
// and every previous layer's output); the last layer is linear and offset by
// one so a zero output is the identity modulation.
AnnotatorEmbedding embed_annotator(const Tensor& one_hot_rows, const ParamStore& params);

// Per-channel scaling of [B, C, h, w] features by g [B, C] (or [1, C]).
Tensor modulate(const Tensor& features, const AnnotatorEmbedding& g);

GaussianParams prior_forward(const Tensor& x, const ParamStore& params);

// x [B,1,H,W], y [B,1,H,W] (one annotation per row), one_hot_rows [B,N].
GaussianParams posterior_forward(const Tensor& x, const Tensor& y, const Tensor& one_hot_rows,
                                 const ParamStore& params);

// e = mu + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from `rng`.
ExpertSignature sample_signature(const GaussianParams& params, Rng& rng,
                                 SignatureSource source = SignatureSource::kPrior);

// KL(q || p) summed over the signature dimensions; returns [B].
Tensor kl_divergence(const GaussianParams& q, const GaussianParams& p);

}  // namespace gds
