#pragma once

// Dense 64-bit tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle. Every op allocates a fresh result whose graph
// node keeps its inputs alive; node ids come from a monotone counter, so an
// input always has a smaller id than anything computed from it and sorting
// by id yields a valid topological order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gds {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct TensorImpl;

struct BackwardContext {
  const TensorImpl& out;
  std::span<const double> grad_out;
  const std::vector<std::shared_ptr<TensorImpl>>& inputs;
  // One slot per input; null when that input does not require a gradient.
  std::span<std::vector<double>* const> grad_in;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::unique_ptr<Node> node;
};

Tensor make_result(std::string op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_values(const Shape& shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int extent(int axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Writable view of a leaf's values; used by optimizers and initializers.
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  std::uint64_t node_id() const;
  // Name of the producing op, or "leaf".
  std::string op_name() const;

  // Copy of the values with no graph history.
  Tensor detach() const;

  // Reverse sweep from this scalar; accumulates into every requires_grad leaf.
  void backward() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

enum class BinaryOp { kAdd, kSub, kMul, kDiv };
enum class Activation { kRelu, kSigmoid };
enum class ReduceOp { kSum, kMean };
enum class ResampleMode { kNearest, kBilinear };

// `b` must have the same rank as `a` with each extent equal or 1, or be a
// rank-0 scalar. The result has the shape of `a`.
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor exp(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor activation(Activation op, const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
double stable_sigmoid(double x);

Tensor matmul(const Tensor& a, const Tensor& b);

struct Conv2dOptions {
  int stride = 1;
  int pad = 0;
};

// Output extent is floor((H + 2*pad - kh) / stride) + 1. Only trailing zero
// padding may be left unvisited; a configuration that would skip real input
// rows or columns is rejected.
int conv_output_extent(int in, int kernel, int stride, int pad);

// x [B,C,H,W], weight [K,C,kh,kw], optional bias [K] -> [B,K,H',W'].
// Cross-correlation convention.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dOptions options = {});

// Spatial resampling of the last two axes of a rank-4 tensor. Bilinear uses
// half-pixel centers: output pixel i samples input coordinate
// (i + 0.5) * in / out - 0.5, clamped to the valid range.
Tensor resample(const Tensor& x, int target_h, int target_w, ResampleMode mode);

Tensor reduce(ReduceOp op, const Tensor& x, const std::vector<int>& axes,
              bool keepdim = false);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdim = false);
Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdim = false);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int length);
Tensor reshape(const Tensor& x, const Shape& shape);
// Broadcasts extents of 1 up to `shape`; backward sums over the broadcast axes.
Tensor expand(const Tensor& x, const Shape& shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator-(const Tensor& a, double c) { return add_scalar(a, -c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }

}  // namespace gds
