#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace gds {

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based seed derivation: the result depends only on the arguments, so
// per-item streams are independent of generation order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t counter = 0);

// Explicit random stream. Distributions are computed here from raw engine
// output rather than through <random> distributions so that sequences are
// fully specified by the engine state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [lo, hi].
  int uniform_int(int lo, int hi);
  // Standard normal via Box-Muller; consumes two engine outputs per call.
  double normal();

  std::string state() const;
  void set_state(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gds
