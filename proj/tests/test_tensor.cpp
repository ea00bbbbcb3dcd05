#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gds/errors.hpp"
#include "gds/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace gds;
using gds::testing::grad_check;
using gds::testing::random_tensor;
using gds::testing::weighted_sum;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Elementwise, AddVectors) {
  auto a = Tensor::from_values({2}, {1, 2});
  auto b = Tensor::from_values({2}, {3, 4});
  EXPECT_EQ(vals(add(a, b)), (std::vector<double>{4, 6}));
}

TEST(Elementwise, MulByOnesIsIdentity) {
  std::mt19937_64 gen(1);
  auto x = random_tensor(gen, {2, 3, 4, 5});
  auto y = mul(x, Tensor::full(x.shape(), 1.0));
  EXPECT_EQ(vals(y), vals(x));
}

TEST(Elementwise, BackwardOfSquareSum) {
  auto x = Tensor::from_values({3}, {1, -2, 3}, true);
  sum(mul(x, x)).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, -4, 6}));
}

TEST(Elementwise, ChannelBroadcastSumsInBackward) {
  auto x = Tensor::full({1, 2, 3, 3}, 2.0, true);
  auto g = Tensor::from_values({1, 2, 1, 1}, {0.5, -1.0}, true);
  auto y = mul(x, g);
  EXPECT_DOUBLE_EQ(y.values()[0], 1.0);
  EXPECT_DOUBLE_EQ(y.values()[9], -2.0);
  sum(y).backward();
  EXPECT_DOUBLE_EQ(g.grad()[0], 18.0);
  EXPECT_DOUBLE_EQ(g.grad()[1], 18.0);
}

TEST(Elementwise, IncompatibleShapesNameBoth) {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[3,2]"), std::string::npos);
  }
}

TEST(Matmul, IdentityAndSmallProduct) {
  std::mt19937_64 gen(2);
  auto a = random_tensor(gen, {3, 4});
  auto eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(vals(matmul(eye, a)), vals(a));
  auto r = matmul(Tensor::from_values({1, 2}, {1, 2}), Tensor::from_values({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(r.item(), 11.0);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(3);
  auto r = grad_check([](const std::vector<Tensor>& in) { return weighted_sum(matmul(in[0], in[1])); },
                      {random_tensor(gen, {3, 4}), random_tensor(gen, {4, 2})});
  EXPECT_LE(r.max_rel_error, 1e-6);
}

TEST(Matmul, InnerMismatchIsShapeError) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST(Conv2d, UnitPointwiseKernelIsIdentity) {
  std::mt19937_64 gen(4);
  auto x = random_tensor(gen, {2, 1, 5, 6});
  auto y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), Tensor());
  EXPECT_EQ(vals(y), vals(x));
}

TEST(Conv2d, OnesKernelOnConstantImage) {
  const double c = 1.75;
  auto x = Tensor::full({1, 1, 6, 6}, c);
  auto y = conv2d(x, Tensor::full({1, 1, 3, 3}, 1.0), Tensor(), {1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 6, 6}));
  // Direct summation: interior sees 9 taps, edges 6, corners 4.
  for (int r = 0; r < 6; ++r) {
    for (int col = 0; col < 6; ++col) {
      const int rows_in = (r == 0 || r == 5) ? 2 : 3;
      const int cols_in = (col == 0 || col == 5) ? 2 : 3;
      EXPECT_DOUBLE_EQ(y.values()[static_cast<std::size_t>(r * 6 + col)], rows_in * cols_in * c);
    }
  }
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  auto r = grad_check(
      [](const std::vector<Tensor>& in) {
        return weighted_sum(conv2d(in[0], in[1], in[2], {1, 1}));
      },
      {random_tensor(gen, {1, 2, 5, 5}), random_tensor(gen, {3, 2, 3, 3}), random_tensor(gen, {3})});
  EXPECT_LE(r.max_rel_error, 1e-5);
}

TEST(Conv2d, StrideTwoOnEvenInputUsesTrailingPad) {
  EXPECT_EQ(conv_output_extent(64, 3, 2, 1), 32);
  EXPECT_EQ(conv_output_extent(5, 3, 2, 1), 3);
  // (6 - 3) / 2 would drop a real input row.
  EXPECT_THROW(conv_output_extent(6, 3, 2, 0), ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 6, 6}), Tensor::zeros({1, 1, 3, 3}), Tensor(), {2, 0}),
               ShapeError);
}

TEST(Conv2d, EvenKernelRejected) {
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 2, 2}), Tensor()), ShapeError);
}

TEST(Activation, SigmoidAndRelu) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(vals(relu(Tensor::from_values({3}, {-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
}

TEST(Activation, SigmoidIsStableForLargeArguments) {
  // exp(-1000) underflows; the true value is 1 - 5e-435, so the double result is 1.
  const double hi = sigmoid(Tensor::scalar(1000.0)).item();
  EXPECT_GT(hi, 1.0 - 1e-12);
  EXPECT_LE(hi, 1.0);
  const double lo = sigmoid(Tensor::scalar(-1000.0)).item();
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(lo, 1e-12);
  EXPECT_NEAR(stable_sigmoid(-745.0), std::exp(-745.0), 1e-320);
}

TEST(Resample, NearestUpsampleRepeatsBlocks) {
  auto x = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = resample(x, 4, 4, ResampleMode::kNearest);
  EXPECT_EQ(vals(y), (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
}

TEST(Resample, SameSizeIsIdentity) {
  std::mt19937_64 gen(6);
  auto x = random_tensor(gen, {1, 2, 5, 7});
  EXPECT_EQ(vals(resample(x, 5, 7, ResampleMode::kBilinear)), vals(x));
  EXPECT_EQ(vals(resample(x, 5, 7, ResampleMode::kNearest)), vals(x));
}

TEST(Resample, BilinearHalfPixelCenters) {
  // Output centers map to input coordinates -0.25, 0.25, 0.75, 1.25; the ends
  // clamp to the border samples.
  auto y = resample(Tensor::from_values({1, 1, 1, 2}, {0, 1}), 1, 4, ResampleMode::kBilinear);
  const auto v = vals(y);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_DOUBLE_EQ(v[0], 0.0);
  EXPECT_DOUBLE_EQ(v[1], 0.25);
  EXPECT_DOUBLE_EQ(v[2], 0.75);
  EXPECT_DOUBLE_EQ(v[3], 1.0);
}

TEST(Resample, ZeroTargetIsShapeError) {
  EXPECT_THROW(resample(Tensor::zeros({1, 1, 2, 2}), 0, 2, ResampleMode::kBilinear), ShapeError);
}

TEST(Reduce, SumMeanAndGradient) {
  auto x = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
  EXPECT_DOUBLE_EQ(sum(x).item(), 10.0);
  EXPECT_DOUBLE_EQ(mean(Tensor::full({3, 4}, 2.5)).item(), 2.5);
  mean(x).backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 0.25);
}

TEST(Reduce, AxesAndKeepdim) {
  auto x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(vals(sum(x, {1})), (std::vector<double>{6, 15}));
  EXPECT_EQ(sum(x, {0}, true).shape(), (Shape{1, 3}));
  EXPECT_EQ(vals(mean(x, {0})), (std::vector<double>{2.5, 3.5, 4.5}));
  EXPECT_THROW(sum(x, {2}), ShapeError);
}

TEST(Concat, SinglePartAndChannelAxis) {
  std::mt19937_64 gen(7);
  auto a = random_tensor(gen, {1, 3, 8, 8});
  auto b = random_tensor(gen, {1, 6, 8, 8});
  EXPECT_EQ(vals(concat({a}, 1)), vals(a));
  auto c = concat({a, b}, 1);
  EXPECT_EQ(c.shape(), (Shape{1, 9, 8, 8}));
  EXPECT_EQ(vals(slice(c, 1, 0, 3)), vals(a));
  EXPECT_EQ(vals(slice(c, 1, 3, 6)), vals(b));
}

TEST(Concat, ExtentMismatchIsShapeError) {
  EXPECT_THROW(concat({Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 2, 4, 5})}, 1), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::from_values({2, 2}, {1, -1, 3, 0.5}, true);
  sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, DiamondAccumulates) {
  auto x = Tensor::from_values({3}, {0.5, -1.5, 2.0}, true);
  sum(add(mul(x, x), mul(x, x))).backward();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 4.0 * x.values()[i]);
}

TEST(Backward, NonScalarRootIsContractError) {
  auto x = Tensor::zeros({2}, true);
  EXPECT_THROW(mul_scalar(x, 2.0).backward(), ContractError);
}

TEST(Backward, RepeatedBackwardDoublesGradients) {
  std::mt19937_64 gen(8);
  auto x = random_tensor(gen, {1, 2, 4, 4});
  auto w = random_tensor(gen, {2, 2, 3, 3});
  auto loss = weighted_sum(sigmoid(conv2d(x, w, Tensor(), {1, 1})));
  loss.backward();
  std::vector<double> once(w.grad().begin(), w.grad().end());
  loss.backward();
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(w.grad()[i], 2.0 * once[i]);
}

TEST(Backward, CompositeGraphMatchesFiniteDifferences) {
  std::mt19937_64 gen(9);
  auto r = grad_check(
      [](const std::vector<Tensor>& in) {
        auto h = conv2d(in[0], in[1], Tensor(), {2, 1});
        auto a = sigmoid(h);
        auto up = resample(a, 6, 6, ResampleMode::kBilinear);
        auto c = concat({up, in[0]}, 1);
        return weighted_sum(mul(c, c));
      },
      {random_tensor(gen, {1, 2, 6, 6}), random_tensor(gen, {2, 2, 3, 3})});
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(Tensor, NonFiniteResultsAreErrors) {
  EXPECT_THROW(exp(Tensor::scalar(1000.0)), NonFiniteError);
  EXPECT_THROW(div(Tensor::scalar(1.0), Tensor::scalar(0.0)), NonFiniteError);
  EXPECT_THROW(Tensor::from_values({1}, {std::nan("")}), NonFiniteError);
}

TEST(Tensor, GraphOrderIsTopological) {
  auto x = Tensor::zeros({2}, true);
  auto y = mul_scalar(x, 2.0);
  auto z = add(y, x);
  EXPECT_LT(x.node_id(), y.node_id());
  EXPECT_LT(y.node_id(), z.node_id());
  for (const auto& in : z.impl()->node->inputs) EXPECT_LT(in->id, z.node_id());
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  auto x = Tensor::zeros({2}, true);
  NoGradGuard guard;
  auto y = mul_scalar(x, 3.0);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Tensor, OpsAreDeterministic) {
  std::mt19937_64 gen(10);
  auto x = random_tensor(gen, {2, 3, 8, 8});
  auto w = random_tensor(gen, {4, 3, 3, 3});
  auto a = conv2d(x, w, Tensor(), {2, 1});
  auto b = conv2d(x, w, Tensor(), {2, 1});
  EXPECT_EQ(vals(a), vals(b));
}
