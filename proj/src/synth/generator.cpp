#include <algorithm>
#include <cmath>
#include <numeric>

#include "gds/morphology.hpp"
#include "gds/synth.hpp"

namespace gds {

namespace {

constexpr int kMaxShapeDraws = 10000;
constexpr int kMaxSampleAttempts = 1000;

void z_normalize(ImageGrid& image) {
  const double n = static_cast<double>(image.size());
  const double mu = std::accumulate(image.data.begin(), image.data.end(), 0.0) / n;
  double var = 0.0;
  for (double v : image.data) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / n);
  for (auto& v : image.data) v = sd > 0.0 ? (v - mu) / sd : 0.0;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ParameterError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split == split) out.push_back(i);
  }
  return out;
}

LatentShape gen_latent_shape(Rng& rng, int h, int w) {
  if (h < kMinExtent || w < kMinExtent) {
    throw ParameterError("gen_latent_shape: extents must be >= " + std::to_string(kMinExtent) +
                         ", got " + std::to_string(h) + "x" + std::to_string(w));
  }
  LatentShape shape;
  shape.blur_sigma = rng.uniform(1.0, 3.0);
  const double extent = std::min(h, w);
  for (int draw = 0; draw < kMaxShapeDraws; ++draw) {
    ImageGrid field(h, w, 0.0);
    const int bumps = rng.uniform_int(2, 4);
    for (int b = 0; b < bumps; ++b) {
      const double cy = rng.uniform(0.25 * h, 0.75 * h);
      const double cx = rng.uniform(0.25 * w, 0.75 * w);
      const double s = rng.uniform(extent / 12.0, extent / 6.0);
      const double a = rng.uniform(0.6, 1.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          field(y, x) += a * std::exp(-0.5 * d2 / (s * s));
        }
      }
    }
    const double peak = *std::max_element(field.data.begin(), field.data.end());
    const double threshold = rng.uniform(0.3, 0.6) * peak;
    MaskGrid mask(h, w, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] = field.data[i] >= threshold;
    const double frac = static_cast<double>(foreground_count(mask)) / static_cast<double>(mask.size());
    if (frac < kMinForeground || frac > kMaxForeground) continue;

    ImageGrid image(h, w);
    for (std::size_t i = 0; i < image.size(); ++i) image.data[i] = mask.data[i];
    image = gaussian_blur(image, shape.blur_sigma);
    for (auto& v : image.data) v += kImageNoiseSigma * rng.normal();
    z_normalize(image);
    shape.image = std::move(image);
    shape.mask = std::move(mask);
    return shape;
  }
  throw Error("gen_latent_shape: no admissible shape after " + std::to_string(kMaxShapeDraws) +
              " draws");
}

double blur_sigma_for_seed(std::uint64_t seed) {
  Rng rng(seed);
  return rng.uniform(1.0, 3.0);
}

std::optional<MaskGrid> annotate(const MaskGrid& latent_mask, const AnnotatorProfile& profile,
                                 Rng& rng) {
  for (auto v : latent_mask.data) {
    if (v > 1) throw ContractError("annotate: latent mask must be binary");
  }
  MaskGrid m = latent_mask;
  if (profile.systematic_offset > 0.0) {
    m = dilate_disk(m, profile.systematic_offset);
  } else if (profile.systematic_offset < 0.0) {
    m = erode_disk(m, -profile.systematic_offset);
  }
  if (foreground_count(m) == 0) return std::nullopt;

  const double amplitude = rng.uniform(profile.jitter_lo, profile.jitter_hi);
  if (amplitude <= 0.0) return m;

  const int h = m.height, w = m.width;
  ImageGrid dy(h, w), dx(h, w);
  for (auto& v : dy.data) v = rng.normal();
  for (auto& v : dx.data) v = rng.normal();
  dy = gaussian_blur(dy, kJitterCorrelationLength);
  dx = gaussian_blur(dx, kJitterCorrelationLength);
  double peak = 0.0;
  for (std::size_t i = 0; i < dy.size(); ++i) {
    peak = std::max(peak, std::hypot(dy.data[i], dx.data[i]));
  }
  const double scale = peak > 0.0 ? amplitude / peak : 0.0;

  ImageGrid soft(h, w);
  for (std::size_t i = 0; i < soft.size(); ++i) soft.data[i] = m.data[i];
  MaskGrid out(h, w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = sample_bilinear_zero(soft, y + scale * dy(y, x), x + scale * dx(y, x));
      out(y, x) = v >= 0.5 ? 1 : 0;
    }
  }
  if (foreground_count(out) == 0) return std::nullopt;
  return out;
}

void validate_profile(const AnnotatorProfile& p, int h, int w) {
  const std::string who = "annotator " + std::to_string(p.id);
  if (!(p.jitter_lo >= 0.0 && p.jitter_lo <= p.jitter_hi && p.jitter_hi <= 5.0)) {
    throw ParameterError(who + ": jitter range must satisfy 0 <= lo <= hi <= 5");
  }
  if (!(std::abs(p.systematic_offset) <= std::min(h, w) / 8.0)) {
    throw ParameterError(who + ": |systematic_offset| must not exceed image extent / 8");
  }
}

std::optional<MultiRaterSample> generate_sample(std::uint64_t seed, int h, int w,
                                                const std::vector<AnnotatorProfile>& profiles) {
  Rng rng(seed);
  auto shape = gen_latent_shape(rng, h, w);
  MultiRaterSample s;
  s.seed = seed;
  s.blur_sigma = shape.blur_sigma;
  for (const auto& p : profiles) {
    auto ann = annotate(shape.mask, p, rng);
    if (!ann) return std::nullopt;
    s.annotations.push_back(std::move(*ann));
    s.annotator_ids.push_back(p.id);
  }
  s.image = std::move(shape.image);
  s.latent_mask = std::move(shape.mask);
  return s;
}

std::vector<AnnotatorProfile> DatasetConfig::default_profiles() {
  return {{0, -6.0, 1.0, 5.0}, {1, 0.0, 1.0, 5.0}, {2, 6.0, 1.0, 5.0}};
}

void DatasetConfig::validate() const {
  if (samples < 0) throw ConfigError("data.samples", "must be >= 0");
  if (height < kMinExtent || width < kMinExtent) {
    throw ConfigError("data.height", "image extents must be >= " + std::to_string(kMinExtent));
  }
  for (double f : {split_train, split_val, split_test}) {
    if (f < 0.0) throw ConfigError("data.split_train", "split fractions must be nonnegative");
  }
  if (std::abs(split_train + split_val + split_test - 1.0) > 1e-9) {
    throw ConfigError("data.split_train",
                      "split fractions (data.split_train, data.split_val, data.split_test) must sum to 1");
  }
  if (profiles.empty()) throw ConfigError("data.offsets", "at least one annotator is required");
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      if (profiles[i].id == profiles[j].id) throw ConfigError("data.offsets", "annotator ids must be distinct");
    }
    try {
      validate_profile(profiles[i], height, width);
    } catch (const ParameterError& e) {
      throw ConfigError("data.offsets", e.what());
    }
  }
}

SplitSizes split_sizes(std::size_t n, double train, double val) {
  SplitSizes s;
  s.train = std::min(n, static_cast<std::size_t>(std::llround(train * static_cast<double>(n))));
  s.val = std::min(n - s.train, static_cast<std::size_t>(std::llround(val * static_cast<double>(n))));
  s.test = n - s.train - s.val;
  return s;
}

Dataset build_dataset(const DatasetConfig& config, std::uint64_t master_seed) {
  config.validate();
  Dataset ds;
  ds.profiles = config.profiles;
  const auto n = static_cast<std::size_t>(config.samples);
  const auto sizes = split_sizes(n, config.split_train, config.split_val);
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<MultiRaterSample> sample;
    for (int attempt = 0; attempt < kMaxSampleAttempts && !sample; ++attempt) {
      sample = generate_sample(derive_seed(master_seed, i, static_cast<std::uint64_t>(attempt)),
                               config.height, config.width, config.profiles);
    }
    if (!sample) throw Error("build_dataset: sample " + std::to_string(i) + " could not be generated");
    sample->split = i < sizes.train ? Split::kTrain
                    : i < sizes.train + sizes.val ? Split::kVal
                                                  : Split::kTest;
    ds.samples.push_back(std::move(*sample));
  }
  return ds;
}

}  // namespace gds
