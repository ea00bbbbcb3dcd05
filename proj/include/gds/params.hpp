#pragma once

#include <array>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gds/rng.hpp"
#include "gds/tensor.hpp"

namespace gds {

struct ModelConfig {
  int num_annotators = 3;
  int signature_dim = 6;
  std::array<int, 4> pyramid_channels{16, 32, 64, 128};
  int embed_channels = 64;    // width of the style-modulated posterior feature map
  int embed_hidden = 32;      // dense annotator encoder layer width
  int decoder_channels = 32;
  bool use_attention = true;  // false bypasses the signature attention gates (alpha = 1)

  bool operator==(const ModelConfig&) const = default;
};

// Named trainable leaves in registration order.
class ParamStore {
 public:
  Tensor& create(const std::string& name, const Shape& shape);

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class InitScheme { kKaimingNormal };

// Weights (names ending in ".w") get N(0, 2 / fan_in); everything else is
// zeroed. Conv weights [K,C,kh,kw] have fan_in C*kh*kw, dense weights
// [in,out] have fan_in `in`. Draws follow registration order.
void init_params(ParamStore& params, Rng& rng, InitScheme scheme = InitScheme::kKaimingNormal);

// Helpers shared by the network modules.
Tensor conv_layer(const Tensor& x, const ParamStore& params, const std::string& prefix,
                  int stride, int pad);
Tensor dense_layer(const Tensor& x, const ParamStore& params, const std::string& prefix);
void register_conv(ParamStore& params, const std::string& prefix, int out, int in, int k);
void register_dense(ParamStore& params, const std::string& prefix, int in, int out);

}  // namespace gds
