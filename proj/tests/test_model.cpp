#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gds/backbone.hpp"
#include "gds/errors.hpp"
#include "gds/esg.hpp"
#include "gds/scm.hpp"
#include "support/gradcheck.hpp"

using namespace gds;
using gds::testing::grad_check;
using gds::testing::random_tensor;
using gds::testing::weighted_sum;

namespace {

GdsModel default_model(std::uint64_t seed = 1) {
  Rng rng(seed);
  return make_model(ModelConfig{}, rng);
}

Tensor image_batch(std::mt19937_64& gen, int b, int h = 64, int w = 64) {
  return random_tensor(gen, {b, 1, h, w}, -2.0, 2.0, false);
}

Tensor mask_batch(std::mt19937_64& gen, int b, int h = 64, int w = 64) {
  std::bernoulli_distribution bit(0.3);
  std::vector<double> v(static_cast<std::size_t>(b * h * w));
  for (auto& x : v) x = bit(gen);
  return Tensor::from_values({b, 1, h, w}, std::move(v));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Central difference of a scalar loss with respect to one parameter entry.
double numeric_param_grad(ParamStore& params, const std::string& name, std::size_t index,
                          const std::function<double()>& loss, double h = 1e-5) {
  auto v = params.at(name).mutable_values();
  const double saved = v[index];
  v[index] = saved + h;
  const double fp = loss();
  v[index] = saved - h;
  const double fm = loss();
  v[index] = saved;
  return (fp - fm) / (2.0 * h);
}

}  // namespace

TEST(Backbone, PyramidShapes) {
  auto model = default_model();
  std::mt19937_64 gen(1);
  auto pyr = backbone_forward(image_batch(gen, 2), model.params);
  const std::array<Shape, 4> expected{Shape{2, 16, 16, 16}, Shape{2, 32, 8, 8}, Shape{2, 64, 4, 4},
                                      Shape{2, 128, 2, 2}};
  for (int l = 0; l < 4; ++l) EXPECT_EQ(pyr.levels[l].shape(), expected[l]);
}

TEST(Backbone, ZeroInputGivesZeroPyramid) {
  auto model = default_model();
  auto pyr = backbone_forward(Tensor::zeros({1, 1, 32, 32}), model.params);
  for (const auto& level : pyr.levels)
    for (double v : level.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, NonMultipleOf32IsShapeError) {
  auto model = default_model();
  EXPECT_THROW(backbone_forward(Tensor::zeros({1, 1, 48, 64}), model.params), ShapeError);
  EXPECT_THROW(backbone_forward(Tensor::zeros({1, 2, 64, 64}), model.params), ShapeError);
}

TEST(Backbone, GradientReachesFirstStage) {
  auto model = default_model();
  std::mt19937_64 gen(2);
  auto x = image_batch(gen, 1);
  auto loss = [&] { return weighted_sum(backbone_forward(x, model.params).levels[3]); };
  model.params.zero_grad();
  loss().backward();
  const auto& w = model.params.at("backbone.s1a.w");
  ASSERT_TRUE(w.has_grad());
  double norm = 0.0;
  for (double g : w.grad()) norm += g * g;
  EXPECT_GT(norm, 0.0);
  for (std::size_t idx : {0u, 17u, 101u}) {
    const double num = numeric_param_grad(model.params, "backbone.s1a.w", idx, [&] {
      NoGradGuard ng;
      return loss().item();
    });
    EXPECT_NEAR(w.grad()[idx], num, 1e-5 * std::max(1.0, std::abs(num)));
  }
}

TEST(Init, KaimingVarianceAndZeroBiases) {
  auto model = default_model(3);
  for (const auto& [name, t] : model.params) {
    auto v = t.values();
    if (name.ends_with(".b")) {
      for (double x : v) ASSERT_EQ(x, 0.0) << name;
      continue;
    }
    if (v.size() < 5000) continue;
    const auto& s = t.shape();
    const double fan_in = s.size() == 4 ? double(s[1]) * s[2] * s[3] : double(s[0]);
    double ss = 0.0;
    for (double x : v) ss += x * x;
    EXPECT_NEAR(ss / v.size(), 2.0 / fan_in, 0.1 * 2.0 / fan_in) << name;
  }
}

TEST(Init, SameSeedSameParameters) {
  auto a = default_model(4), b = default_model(4), c = default_model(5);
  bool any_diff = false;
  for (const auto& [name, t] : a.params) {
    auto va = t.values(), vb = b.params.at(name).values(), vc = c.params.at(name).values();
    EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin())) << name;
    any_diff |= !std::equal(va.begin(), va.end(), vc.begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Embedding, OneHotRowsAndContract) {
  EXPECT_THROW(one_hot({3}, 3), ParameterError);
  auto model = default_model();
  EXPECT_THROW(embed_annotator(Tensor::zeros({1, 3}), model.params), ContractError);
  EXPECT_THROW(embed_annotator(Tensor::from_values({1, 3}, {1, 1, 0}), model.params), ContractError);
  EXPECT_THROW(embed_annotator(Tensor::from_values({1, 3}, {0.5, 0.5, 0}), model.params),
               ContractError);
  EXPECT_THROW(embed_annotator(one_hot({0}, 4), model.params), ShapeError);
}

TEST(Embedding, DistinctIdsDistinctEmbeddingsSameIdIdentical) {
  auto model = default_model();
  auto g = embed_annotator(one_hot({0, 1, 2, 1}, 3), model.params).g;
  ASSERT_EQ(g.shape(), (Shape{4, 64}));
  auto v = g.values();
  auto row = [&](int r) { return v.subspan(static_cast<std::size_t>(r) * 64, 64); };
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) EXPECT_GT(max_abs_diff(row(i), row(j)), 0.0);
  EXPECT_EQ(max_abs_diff(row(1), row(3)), 0.0);
}

TEST(Modulate, IdentityAndAnnihilation) {
  std::mt19937_64 gen(6);
  auto f = random_tensor(gen, {2, 4, 3, 3}, -1, 1, false);
  auto same = modulate(f, {Tensor::full({2, 4}, 1.0)});
  EXPECT_EQ(max_abs_diff(same.values(), f.values()), 0.0);
  auto zero = modulate(f, {Tensor::zeros({2, 4})});
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(modulate(f, {Tensor::zeros({2, 5})}), ShapeError);
}

TEST(Modulate, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(7);
  auto f = random_tensor(gen, {2, 4, 3, 3});
  auto g = random_tensor(gen, {2, 4});
  auto r = grad_check([](const std::vector<Tensor>& in) { return weighted_sum(modulate(in[0], {in[1]})); },
                      {f, g});
  EXPECT_LE(r.max_rel_error, 1e-5);
}

TEST(Prior, DeterministicAndImageSensitive) {
  auto model = default_model();
  std::mt19937_64 gen(8);
  auto x = image_batch(gen, 2);
  auto a = prior_forward(x, model.params), b = prior_forward(x, model.params);
  ASSERT_EQ(a.mu.shape(), (Shape{2, 6}));
  EXPECT_EQ(max_abs_diff(a.mu.values(), b.mu.values()), 0.0);
  EXPECT_EQ(max_abs_diff(a.log_var.values(), b.log_var.values()), 0.0);
  auto mu = a.mu.values();
  EXPECT_GT(max_abs_diff(mu.subspan(0, 6), mu.subspan(6, 6)), 0.0);
}

TEST(Prior, LogVarClampedUnderAdversarialParams) {
  auto model = default_model();
  std::mt19937_64 gen(9);
  auto x = image_batch(gen, 1);
  for (double bias : {1e4, -1e4}) {
    for (auto& v : model.params.at("esg.prior.logvar.b").mutable_values()) v = bias;
    auto q = prior_forward(x, model.params);
    for (double lv : q.log_var.values()) {
      EXPECT_GE(lv, kLogVarMin);
      EXPECT_LE(lv, kLogVarMax);
    }
  }
}

TEST(Posterior, AnnotatorIdentityChangesOutput) {
  auto model = default_model();
  std::mt19937_64 gen(10);
  auto x = image_batch(gen, 1);
  auto y = mask_batch(gen, 1);
  auto q0 = posterior_forward(x, y, one_hot({0}, 3), model.params);
  auto q0b = posterior_forward(x, y, one_hot({0}, 3), model.params);
  auto q2 = posterior_forward(x, y, one_hot({2}, 3), model.params);
  EXPECT_EQ(max_abs_diff(q0.mu.values(), q0b.mu.values()), 0.0);
  EXPECT_GT(max_abs_diff(q0.mu.values(), q2.mu.values()) +
                max_abs_diff(q0.log_var.values(), q2.log_var.values()),
            0.0);
  EXPECT_THROW(posterior_forward(x, mask_batch(gen, 1, 32, 32), one_hot({0}, 3), model.params),
               ShapeError);
}

TEST(Posterior, GradientsReachEmbeddingParameters) {
  auto model = default_model();
  std::mt19937_64 gen(11);
  auto x = image_batch(gen, 1);
  auto y = mask_batch(gen, 1);
  auto loss = [&] { return sum(posterior_forward(x, y, one_hot({1}, 3), model.params).mu); };
  model.params.zero_grad();
  loss().backward();
  const auto& w = model.params.at("esg.embed.l3.w");
  ASSERT_TRUE(w.has_grad());
  // Row 1 of the final layer's weight multiplies the active one-hot entry.
  const std::size_t idx = 1 * 64 + 5;
  EXPECT_NE(w.grad()[idx], 0.0);
  const double num = numeric_param_grad(model.params, "esg.embed.l3.w", idx, [&] {
    NoGradGuard ng;
    return loss().item();
  });
  EXPECT_NEAR(w.grad()[idx], num, 1e-6 * std::max(1.0, std::abs(num)));
}

TEST(Sampling, ZeroVarianceLimit) {
  Rng rng(12);
  GaussianParams q{Tensor::from_values({1, 6}, {0.5, -1, 2, 0, 3, -4}), Tensor::full({1, 6}, kLogVarMin)};
  auto e = sample_signature(q, rng).e;
  EXPECT_LE(max_abs_diff(e.values(), q.mu.values()), 1e-4);
}

TEST(Sampling, MonteCarloMoments) {
  Rng rng(13);
  const std::vector<double> mu{0.3, -1.2}, lv{0.5, -1.0};
  GaussianParams q{Tensor::from_values({1, 2}, mu), Tensor::from_values({1, 2}, lv)};
  const int n = 100000;
  std::vector<double> s(2, 0.0), ss(2, 0.0);
  for (int k = 0; k < n; ++k) {
    auto sig = sample_signature(q, rng);
    auto e = sig.e.values();
    for (int d = 0; d < 2; ++d) {
      s[d] += e[d];
      ss[d] += e[d] * e[d];
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double var = std::exp(lv[d]);
    const double m = s[d] / n;
    const double v = ss[d] / n - m * m;
    EXPECT_LE(std::abs(m - mu[d]), 3.0 * std::sqrt(var / n));
    EXPECT_LE(std::abs(v - var), 3.0 * std::sqrt(2.0 * var * var / n));
  }
}

TEST(Sampling, PathwiseGradientWrtMuIsIdentity) {
  Rng rng(14);
  auto mu = Tensor::from_values({1, 3}, {0.1, 0.2, 0.3}, true);
  auto lv = Tensor::from_values({1, 3}, {0.0, -0.5, 0.5}, true);
  for (int k = 0; k < 50; ++k) sum(sample_signature({mu, lv}, rng).e).backward();
  for (double g : mu.grad()) EXPECT_DOUBLE_EQ(g / 50.0, 1.0);
}

TEST(Kl, ClosedFormCases) {
  std::mt19937_64 gen(15);
  auto mu = random_tensor(gen, {3, 6}, -1, 1, false), lv = random_tensor(gen, {3, 6}, -2, 2, false);
  auto self = kl_divergence({mu, lv}, {mu, lv});
  for (double v : self.values()) EXPECT_LE(std::abs(v), 1e-12);
  GaussianParams q{Tensor::from_values({1, 1}, {1.0}), Tensor::zeros({1, 1})};
  GaussianParams p{Tensor::zeros({1, 1}), Tensor::zeros({1, 1})};
  EXPECT_DOUBLE_EQ(kl_divergence(q, p).item(), 0.5);
  GaussianParams p2{Tensor::zeros({1, 2}), Tensor::zeros({1, 2})};
  EXPECT_THROW(kl_divergence(q, p2), ShapeError);
}

TEST(Kl, MatchesMonteCarloEstimate) {
  std::mt19937_64 gen(16);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n01;
  for (int pair = 0; pair < 10; ++pair) {
    const int d = 2;
    std::vector<double> mq(d), lq(d), mp(d), lp(d);
    for (int i = 0; i < d; ++i) {
      mq[i] = u(gen), lq[i] = u(gen), mp[i] = u(gen), lp[i] = u(gen);
    }
    const double kl = kl_divergence({Tensor::from_values({1, d}, mq), Tensor::from_values({1, d}, lq)},
                                    {Tensor::from_values({1, d}, mp), Tensor::from_values({1, d}, lp)})
                          .item();
    // Independent estimator: E_q[log q(e) - log p(e)] with explicit Gaussian log densities.
    const int draws = 1000000;
    double acc = 0.0;
    for (int k = 0; k < draws; ++k) {
      for (int i = 0; i < d; ++i) {
        const double e = mq[i] + std::exp(0.5 * lq[i]) * n01(gen);
        const double log_q = -0.5 * (lq[i] + (e - mq[i]) * (e - mq[i]) / std::exp(lq[i]));
        const double log_p = -0.5 * (lp[i] + (e - mp[i]) * (e - mp[i]) / std::exp(lp[i]));
        acc += log_q - log_p;
      }
    }
    EXPECT_NEAR(acc / draws, kl, 0.02 * kl) << "pair " << pair;
  }
}

TEST(Kl, NonNegativeAndDifferentiable) {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 200; ++t) {
    auto a = random_tensor(gen, {2, 6}, -3, 3, false), b = random_tensor(gen, {2, 6}, -5, 5, false);
    auto c = random_tensor(gen, {2, 6}, -3, 3, false), d = random_tensor(gen, {2, 6}, -5, 5, false);
    auto kl = kl_divergence({a, b}, {c, d});
    for (double v : kl.values()) ASSERT_GE(v, 0.0);
  }
  auto r = grad_check(
      [](const std::vector<Tensor>& in) {
        return weighted_sum(kl_divergence({in[0], in[1]}, {in[2], in[3]}));
      },
      {random_tensor(gen, {2, 3}), random_tensor(gen, {2, 3}), random_tensor(gen, {2, 3}),
       random_tensor(gen, {2, 3})});
  EXPECT_LE(r.max_rel_error, 1e-6);
}

TEST(Tile, ValuesAndGradient) {
  auto e = Tensor::from_values({1, 3}, {1.0, -2.0, 0.5}, true);
  auto one = tile_signature(e, 1, 1);
  EXPECT_EQ(one.shape(), (Shape{1, 3, 1, 1}));
  EXPECT_EQ(max_abs_diff(one.values(), e.values()), 0.0);
  auto t = tile_signature(e, 4, 5);
  auto v = t.values();
  for (int d = 0; d < 3; ++d)
    for (int p = 0; p < 20; ++p) EXPECT_EQ(v[d * 20 + p], e.values()[d]);
  sum(t).backward();
  for (double g : e.grad()) EXPECT_EQ(g, 20.0);
}

TEST(Attention, RangeZeroParamsAndGradient) {
  ModelConfig cfg;
  cfg.pyramid_channels = {8, 8, 8, 8};
  ParamStore params;
  register_scm(params, cfg);
  std::mt19937_64 gen(18);
  auto combined = random_tensor(gen, {1, 14, 4, 4});
  auto half = attention(combined, params, 0);
  for (double v : half.values()) EXPECT_EQ(v, 0.5);
  Rng rng(18);
  init_params(params, rng);
  auto alpha = attention(combined, params, 0);
  for (double v : alpha.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(attention(random_tensor(gen, {1, 13, 4, 4}), params, 0), ShapeError);
  auto r = grad_check(
      [&](const std::vector<Tensor>& in) { return weighted_sum(attention(in[0], params, 0)); },
      {combined});
  EXPECT_LE(r.max_rel_error, 1e-5);
}

TEST(FuseDecode, ShapesDeterminismAndSignatureSensitivity) {
  auto model = default_model();
  std::mt19937_64 gen(19);
  for (int size : {64, 96}) {
    auto x = image_batch(gen, 1, size, size);
    auto pyr = backbone_forward(x, model.params);
    auto e1 = random_tensor(gen, {1, 6}, -1, 1, false), e2 = random_tensor(gen, {1, 6}, -1, 1, false);
    auto a = fuse_decode(pyr, e1, model.params, size, size);
    auto b = fuse_decode(pyr, e1, model.params, size, size);
    auto c = fuse_decode(pyr, e2, model.params, size, size);
    EXPECT_EQ(a.shape(), (Shape{1, 1, size, size}));
    EXPECT_EQ(max_abs_diff(a.values(), b.values()), 0.0);
    EXPECT_GT(max_abs_diff(a.values(), c.values()), 0.0);
    auto bypass = fuse_decode(pyr, e1, model.params, size, size, false);
    EXPECT_GT(max_abs_diff(a.values(), bypass.values()), 0.0);
  }
}

TEST(Panel, SingleHypothesisAndDeterminism) {
  auto model = default_model();
  std::mt19937_64 gen(20);
  auto x = image_batch(gen, 1);
  Rng r1(5);
  auto one = sample_panel(x, 1, r1, model);
  EXPECT_EQ(one.consensus, one.hypotheses[0]);
  for (double v : one.dispersion.data) EXPECT_EQ(v, 0.0);
  Rng a(6), b(6);
  auto pa = sample_panel(x, 4, a, model), pb = sample_panel(x, 4, b, model);
  EXPECT_EQ(pa.hypotheses, pb.hypotheses);
  EXPECT_EQ(pa.consensus, pb.consensus);
  EXPECT_EQ(pa.dispersion, pb.dispersion);
  Rng c(7);
  EXPECT_THROW(sample_panel(x, 0, c, model), ParameterError);
}

TEST(Panel, ConsensusBoundedByHypotheses) {
  auto model = default_model(2);
  std::mt19937_64 gen(21);
  Rng rng(8);
  auto p = sample_panel(image_batch(gen, 1), 5, rng, model);
  ASSERT_EQ(p.hypotheses.size(), 5u);
  for (std::size_t i = 0; i < p.consensus.size(); ++i) {
    double lo = 1.0, hi = 0.0;
    for (const auto& h : p.hypotheses) {
      lo = std::min(lo, h.data[i]);
      hi = std::max(hi, h.data[i]);
    }
    ASSERT_GE(p.consensus.data[i], lo);
    ASSERT_LE(p.consensus.data[i], hi);
    ASSERT_GE(p.dispersion.data[i], 0.0);
  }
}

TEST(Panel, CollapsedPriorGivesAgreeingHypotheses) {
  auto model = default_model();
  for (auto& v : model.params.at("esg.prior.logvar.w").mutable_values()) v = 0.0;
  for (auto& v : model.params.at("esg.prior.logvar.b").mutable_values()) v = -40.0;
  std::mt19937_64 gen(22);
  Rng rng(9);
  auto p = sample_panel(image_batch(gen, 1), 6, rng, model);
  for (const auto& h : p.hypotheses)
    EXPECT_LE(max_abs_diff(h.data, p.hypotheses[0].data), 1e-3);
}
