#include "gds/params.hpp"

#include <cmath>

#include "gds/errors.hpp"

namespace gds {

Tensor& ParamStore::create(const std::string& name, const Shape& shape) {
  if (index_.contains(name)) throw ContractError("parameter '" + name + "' registered twice");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, Tensor::zeros(shape, true));
  return entries_.back().second;
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

Tensor& ParamStore::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void init_params(ParamStore& params, Rng& rng, InitScheme scheme) {
  if (scheme != InitScheme::kKaimingNormal) throw ParameterError("unsupported init scheme");
  for (auto& [name, t] : params) {
    auto v = t.mutable_values();
    const bool weight = name.size() > 2 && name.compare(name.size() - 2, 2, ".w") == 0;
    if (!weight) {
      std::fill(v.begin(), v.end(), 0.0);
      continue;
    }
    const auto& s = t.shape();
    const double fan_in = s.size() == 4 ? static_cast<double>(s[1]) * s[2] * s[3]
                                        : static_cast<double>(s[0]);
    const double sd = std::sqrt(2.0 / fan_in);
    for (auto& x : v) x = sd * rng.normal();
  }
}

void register_conv(ParamStore& params, const std::string& prefix, int out, int in, int k) {
  params.create(prefix + ".w", {out, in, k, k});
  params.create(prefix + ".b", {out});
}

void register_dense(ParamStore& params, const std::string& prefix, int in, int out) {
  params.create(prefix + ".w", {in, out});
  params.create(prefix + ".b", {1, out});
}

Tensor conv_layer(const Tensor& x, const ParamStore& params, const std::string& prefix,
                  int stride, int pad) {
  return conv2d(x, params.at(prefix + ".w"), params.at(prefix + ".b"), {stride, pad});
}

Tensor dense_layer(const Tensor& x, const ParamStore& params, const std::string& prefix) {
  return add(matmul(x, params.at(prefix + ".w")), params.at(prefix + ".b"));
}

}  // namespace gds
