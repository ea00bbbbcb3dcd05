#include "gds/tensor.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gds/errors.hpp"

namespace gds {

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool t_grad_enabled = true;

std::uint64_t next_id() { return g_next_id.fetch_add(1, std::memory_order_relaxed); }

void check_shape(const Shape& shape) {
  if (shape.size() > 4) {
    throw ShapeError("tensors have at most 4 axes, got " + shape_str(shape));
  }
  for (int e : shape) {
    if (e < 0) throw ShapeError("negative extent in " + shape_str(shape));
  }
}

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, std::vector<double> data) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->id = next_id();
  return impl;
}

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw ContractError(std::string(what) + ": undefined tensor");
}

// Pads to rank 4 with leading unit axes.
std::array<int, 4> pad4(const Shape& s) {
  std::array<int, 4> out{1, 1, 1, 1};
  const std::size_t off = 4 - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) out[off + i] = s[i];
  return out;
}

std::array<std::size_t, 4> strides4(const std::array<int, 4>& ext) {
  std::array<std::size_t, 4> st{};
  std::size_t acc = 1;
  for (int i = 3; i >= 0; --i) {
    st[i] = acc;
    acc *= static_cast<std::size_t>(ext[i]);
  }
  return st;
}

// Strides of `src` when indexed by coordinates of `dst`; zero on broadcast axes.
std::array<std::size_t, 4> broadcast_strides(const Shape& src, const Shape& dst) {
  auto se = pad4(src);
  auto st = strides4(se);
  auto de = pad4(dst);
  for (int i = 0; i < 4; ++i) {
    if (se[i] == 1 && de[i] != 1) st[i] = 0;
  }
  return st;
}

template <class F>
void for_each_index4(const std::array<int, 4>& ext, F&& f) {
  std::size_t flat = 0;
  for (int i0 = 0; i0 < ext[0]; ++i0)
    for (int i1 = 0; i1 < ext[1]; ++i1)
      for (int i2 = 0; i2 < ext[2]; ++i2)
        for (int i3 = 0; i3 < ext[3]; ++i3) f(flat++, i0, i1, i2, i3);
}

const char* binary_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "add";
    case BinaryOp::kSub: return "sub";
    case BinaryOp::kMul: return "mul";
    case BinaryOp::kDiv: return "div";
  }
  return "?";
}

bool broadcastable(const Shape& b, const Shape& a) {
  if (b.empty()) return true;
  if (b.size() != a.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] != a[i] && b[i] != 1) return false;
  }
  return true;
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw ShapeError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
  }
  return axis;
}

// Unary op with derivative expressed through the input value x and output y.
template <class Fwd, class Dydx>
Tensor unary(std::string name, const Tensor& x, Fwd fwd, Dydx dydx) {
  require_defined(x, name.c_str());
  auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return detail::make_result(
      std::move(name), x.shape(), std::move(out), {x},
      [dydx](const detail::BackwardContext& ctx) {
        if (!ctx.grad_in[0]) return;
        auto& g = *ctx.grad_in[0];
        const auto& xin = ctx.inputs[0]->data;
        const auto& y = ctx.out.data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i] * dydx(xin[i], y[i]);
      });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int e) { return a * static_cast<std::size_t>(e); });
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

Tensor make_result(std::string op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NonFiniteError("op '" + op + "' produced a non-finite value at flat index " +
                           std::to_string(i) + " of a " + shape_str(shape) + " result");
    }
  }
  auto impl = new_impl(std::move(shape), std::move(data));
  const bool track =
      t_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    impl->requires_grad = true;
    impl->node = std::make_unique<Node>();
    impl->node->op = std::move(op);
    impl->node->inputs.reserve(inputs.size());
    for (auto& t : inputs) impl->node->inputs.push_back(t.impl());
    impl->node->backward = std::move(backward);
  }
  return Tensor(std::move(impl));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  check_shape(shape);
  return from_values(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values, bool requires_grad) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("tensor constructed from a non-finite value");
  }
  Tensor t(new_impl(shape, std::move(values)));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return impl_->shape;
}

int Tensor::extent(int axis) const {
  return shape()[static_cast<std::size_t>(normalize_axis(axis, rank(), "extent"))];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<const double> Tensor::values() const {
  require_defined(*this, "values");
  return impl_->data;
}

std::span<double> Tensor::mutable_values() {
  require_defined(*this, "mutable_values");
  if (impl_->node) throw ContractError("mutable_values on a non-leaf tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  require_defined(*this, "set_requires_grad");
  if (impl_->node) throw ContractError("set_requires_grad on a non-leaf tensor");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->node; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "mutable_grad");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

std::uint64_t Tensor::node_id() const {
  require_defined(*this, "node_id");
  return impl_->id;
}

std::string Tensor::op_name() const {
  require_defined(*this, "op_name");
  return impl_->node ? impl_->node->op : std::string("leaf");
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return Tensor(new_impl(impl_->shape, impl_->data));
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (numel() != 1) {
    throw ContractError("backward root must be a scalar, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) throw ContractError("backward root does not require grad");

  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<detail::TensorImpl*> stack{impl_.get()};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto* t = stack.back();
    stack.pop_back();
    order.push_back(t);
    if (!t->node) continue;
    for (auto& in : t->node->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->id > b->id; });

  std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads;
  grads[impl_.get()] = {1.0};
  std::vector<std::vector<double>*> slots;
  for (auto* t : order) {
    auto it = grads.find(t);
    if (it == grads.end()) continue;
    if (!t->node) {
      if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
      for (std::size_t i = 0; i < t->grad.size(); ++i) t->grad[i] += it->second[i];
      grads.erase(it);
      continue;
    }
    slots.clear();
    for (auto& in : t->node->inputs) {
      if (!in->requires_grad) {
        slots.push_back(nullptr);
        continue;
      }
      auto& g = grads[in.get()];
      if (g.empty()) g.assign(in->data.size(), 0.0);
      slots.push_back(&g);
    }
    const detail::BackwardContext ctx{*t, it->second, t->node->inputs, slots};
    t->node->backward(ctx);
    grads.erase(t);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  require_defined(a, binary_name(op));
  require_defined(b, binary_name(op));
  if (!broadcastable(b.shape(), a.shape())) {
    throw ShapeError(std::string(binary_name(op)) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " are incompatible");
  }
  const auto ext = pad4(a.shape());
  const auto bst = broadcast_strides(b.shape(), a.shape());
  const bool same = b.shape() == a.shape();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());

  auto b_index = [&](int i0, int i1, int i2, int i3) {
    return i0 * bst[0] + i1 * bst[1] + i2 * bst[2] + i3 * bst[3];
  };
  auto apply = [op](double x, double y) {
    switch (op) {
      case BinaryOp::kAdd: return x + y;
      case BinaryOp::kSub: return x - y;
      case BinaryOp::kMul: return x * y;
      case BinaryOp::kDiv: return x / y;
    }
    return 0.0;
  };
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(av[i], bv[i]);
  } else {
    for_each_index4(ext, [&](std::size_t f, int i0, int i1, int i2, int i3) {
      out[f] = apply(av[f], bv[b_index(i0, i1, i2, i3)]);
    });
  }

  return detail::make_result(
      binary_name(op), a.shape(), std::move(out), {a, b},
      [op, ext, bst, same](const detail::BackwardContext& ctx) {
        const auto& x = ctx.inputs[0]->data;
        const auto& y = ctx.inputs[1]->data;
        auto* ga = ctx.grad_in[0];
        auto* gb = ctx.grad_in[1];
        auto body = [&](std::size_t f, std::size_t j) {
          const double g = ctx.grad_out[f];
          switch (op) {
            case BinaryOp::kAdd:
              if (ga) (*ga)[f] += g;
              if (gb) (*gb)[j] += g;
              break;
            case BinaryOp::kSub:
              if (ga) (*ga)[f] += g;
              if (gb) (*gb)[j] -= g;
              break;
            case BinaryOp::kMul:
              if (ga) (*ga)[f] += g * y[j];
              if (gb) (*gb)[j] += g * x[f];
              break;
            case BinaryOp::kDiv:
              if (ga) (*ga)[f] += g / y[j];
              if (gb) (*gb)[j] -= g * x[f] / (y[j] * y[j]);
              break;
          }
        };
        if (same) {
          for (std::size_t f = 0; f < x.size(); ++f) body(f, f);
        } else {
          for_each_index4(ext, [&](std::size_t f, int i0, int i1, int i2, int i3) {
            body(f, i0 * bst[0] + i1 * bst[1] + i2 * bst[2] + i3 * bst[3]);
          });
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kMul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kDiv, a, b); }

Tensor add_scalar(const Tensor& x, double c) {
  return unary("add_scalar", x, [c](double v) { return v + c; },
               [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary("mul_scalar", x, [c](double v) { return v * c; },
               [c](double, double) { return c; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("clamp: lo must not exceed hi");
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor activation(Activation op, const Tensor& x) {
  switch (op) {
    case Activation::kRelu:
      return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                   [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kSigmoid:
      return unary("sigmoid", x, stable_sigmoid,
                   [](double, double y) { return y * (1.0 - y); });
  }
  throw ParameterError("unknown activation");
}

Tensor relu(const Tensor& x) { return activation(Activation::kRelu, x); }
Tensor sigmoid(const Tensor& x) { return activation(Activation::kSigmoid, x); }

// ---------------------------------------------------------------------------
// Reductions and shape ops

Tensor reduce(ReduceOp op, const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  const char* name = op == ReduceOp::kSum ? "sum" : "mean";
  require_defined(x, name);
  const int rank = x.rank();
  std::vector<bool> reduced(static_cast<std::size_t>(rank), false);
  for (int a : axes) reduced[static_cast<std::size_t>(normalize_axis(a, rank, name))] = true;

  Shape kept = x.shape();
  std::size_t count = 1;
  for (int i = 0; i < rank; ++i) {
    if (reduced[static_cast<std::size_t>(i)]) {
      count *= static_cast<std::size_t>(kept[static_cast<std::size_t>(i)]);
      kept[static_cast<std::size_t>(i)] = 1;
    }
  }
  Shape out_shape;
  if (keepdim) {
    out_shape = kept;
  } else {
    for (int i = 0; i < rank; ++i) {
      if (!reduced[static_cast<std::size_t>(i)]) out_shape.push_back(x.shape()[static_cast<std::size_t>(i)]);
    }
  }
  const double scale = op == ReduceOp::kMean ? 1.0 / static_cast<double>(count) : 1.0;
  const auto ext = pad4(x.shape());
  const auto ost = broadcast_strides(kept, x.shape());
  auto in = x.values();
  std::vector<double> out(shape_numel(kept), 0.0);
  for_each_index4(ext, [&](std::size_t f, int i0, int i1, int i2, int i3) {
    out[i0 * ost[0] + i1 * ost[1] + i2 * ost[2] + i3 * ost[3]] += in[f];
  });
  if (scale != 1.0) {
    for (auto& v : out) v *= scale;
  }
  return detail::make_result(name, out_shape, std::move(out), {x},
                             [ext, ost, scale](const detail::BackwardContext& ctx) {
                               if (!ctx.grad_in[0]) return;
                               auto& g = *ctx.grad_in[0];
                               for_each_index4(ext, [&](std::size_t f, int i0, int i1, int i2, int i3) {
                                 g[f] += scale * ctx.grad_out[i0 * ost[0] + i1 * ost[1] +
                                                              i2 * ost[2] + i3 * ost[3]];
                               });
                             });
}

namespace {
std::vector<int> all_axes(const Tensor& x) {
  std::vector<int> axes(static_cast<std::size_t>(x.rank()));
  std::iota(axes.begin(), axes.end(), 0);
  return axes;
}
}  // namespace

Tensor sum(const Tensor& x) { return reduce(ReduceOp::kSum, x, all_axes(x)); }
Tensor mean(const Tensor& x) { return reduce(ReduceOp::kMean, x, all_axes(x)); }
Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  return reduce(ReduceOp::kSum, x, axes, keepdim);
}
Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdim) {
  return reduce(ReduceOp::kMean, x, axes, keepdim);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  const int rank = static_cast<int>(first.size());
  axis = normalize_axis(axis, rank, "concat");
  const auto ax = static_cast<std::size_t>(axis);
  Shape out_shape = first;
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: " + shape_str(s) + " does not match " + shape_str(first) +
                       " outside axis " + std::to_string(axis));
    }
    out_shape[ax] += s[ax];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= static_cast<std::size_t>(first[i]);
  for (std::size_t i = ax + 1; i < first.size(); ++i) inner *= static_cast<std::size_t>(first[i]);

  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(static_cast<std::size_t>(p.shape()[ax]) * inner);
  const std::size_t row = static_cast<std::size_t>(out_shape[ax]) * inner;
  std::vector<double> out(outer * row);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(o * row + col));
    }
    col += widths[k];
  }
  return detail::make_result("concat", out_shape, std::move(out), parts,
                             [outer, row, widths](const detail::BackwardContext& ctx) {
                               std::size_t c = 0;
                               for (std::size_t k = 0; k < widths.size(); ++k) {
                                 if (auto* g = ctx.grad_in[k]) {
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     for (std::size_t i = 0; i < widths[k]; ++i) {
                                       (*g)[o * widths[k] + i] += ctx.grad_out[o * row + c + i];
                                     }
                                   }
                                 }
                                 c += widths[k];
                               }
                             });
}

Tensor slice(const Tensor& x, int axis, int start, int length) {
  require_defined(x, "slice");
  const Shape& s = x.shape();
  axis = normalize_axis(axis, x.rank(), "slice");
  const auto ax = static_cast<std::size_t>(axis);
  if (start < 0 || length < 0 || start + length > s[ax]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside extent " + std::to_string(s[ax]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= static_cast<std::size_t>(s[i]);
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= static_cast<std::size_t>(s[i]);
  const std::size_t in_row = static_cast<std::size_t>(s[ax]) * inner;
  const std::size_t out_row = static_cast<std::size_t>(length) * inner;
  const std::size_t offset = static_cast<std::size_t>(start) * inner;
  Shape out_shape = s;
  out_shape[ax] = length;
  auto v = x.values();
  std::vector<double> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * in_row + offset), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  return detail::make_result("slice", out_shape, std::move(out), {x},
                             [outer, in_row, out_row, offset](const detail::BackwardContext& ctx) {
                               if (!ctx.grad_in[0]) return;
                               auto& g = *ctx.grad_in[0];
                               for (std::size_t o = 0; o < outer; ++o) {
                                 for (std::size_t i = 0; i < out_row; ++i) {
                                   g[o * in_row + offset + i] += ctx.grad_out[o * out_row + i];
                                 }
                               }
                             });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  require_defined(x, "reshape");
  check_shape(shape);
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto v = x.values();
  return detail::make_result("reshape", shape, std::vector<double>(v.begin(), v.end()), {x},
                             [](const detail::BackwardContext& ctx) {
                               if (!ctx.grad_in[0]) return;
                               auto& g = *ctx.grad_in[0];
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.grad_out[i];
                             });
}

Tensor expand(const Tensor& x, const Shape& shape) {
  require_defined(x, "expand");
  check_shape(shape);
  if (x.shape().size() != shape.size() || !broadcastable(x.shape(), shape)) {
    throw ShapeError("expand: cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  const auto ext = pad4(shape);
  const auto st = broadcast_strides(x.shape(), shape);
  auto v = x.values();
  std::vector<double> out(shape_numel(shape));
  for_each_index4(ext, [&](std::size_t f, int i0, int i1, int i2, int i3) {
    out[f] = v[i0 * st[0] + i1 * st[1] + i2 * st[2] + i3 * st[3]];
  });
  return detail::make_result("expand", shape, std::move(out), {x},
                             [ext, st](const detail::BackwardContext& ctx) {
                               if (!ctx.grad_in[0]) return;
                               auto& g = *ctx.grad_in[0];
                               for_each_index4(ext, [&](std::size_t f, int i0, int i1, int i2, int i3) {
                                 g[i0 * st[0] + i1 * st[1] + i2 * st[2] + i3 * st[3]] += ctx.grad_out[f];
                               });
                             });
}

}  // namespace gds
