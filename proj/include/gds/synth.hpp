#pragma once

// Synthetic multi-annotator segmentation corpora.
//
// Each annotator disagrees with the hidden contour in two ways: a systematic
// signed boundary offset (dilation or erosion by a disk) and a smooth random
// elastic displacement of a few pixels that is redrawn on every annotation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gds/grid.hpp"
#include "gds/rng.hpp"

namespace gds {

struct AnnotatorProfile {
  std::uint32_t id = 0;
  double systematic_offset = 0.0;  // pixels; > 0 dilates, < 0 erodes
  double jitter_lo = 1.0;          // elastic displacement amplitude range, pixels
  double jitter_hi = 5.0;

  bool operator==(const AnnotatorProfile&) const = default;
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct MultiRaterSample {
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
  ImageGrid image;     // z-score normalized
  MaskGrid latent_mask;
  std::vector<MaskGrid> annotations;
  std::vector<std::uint32_t> annotator_ids;
  double blur_sigma = 0.0;  // boundary blur of the image; the sample's ambiguity level

  int height() const { return image.height; }
  int width() const { return image.width; }
  bool operator==(const MultiRaterSample&) const = default;
};

struct Dataset {
  std::vector<AnnotatorProfile> profiles;
  std::vector<MultiRaterSample> samples;

  std::vector<std::size_t> indices(Split split) const;
  bool operator==(const Dataset&) const = default;
};

struct LatentShape {
  ImageGrid image;
  MaskGrid mask;
  double blur_sigma = 0.0;
};

inline constexpr int kMinExtent = 32;
inline constexpr double kMinForeground = 0.05;
inline constexpr double kMaxForeground = 0.6;
inline constexpr double kImageNoiseSigma = 0.1;
inline constexpr double kJitterCorrelationLength = 8.0;

// Smooth blob (2-4 thresholded Gaussian bumps, rejection-sampled to a
// foreground fraction in [0.05, 0.6]) and its blurred, noisy, z-scored image.
// The blur sigma is the first draw taken from `rng`.
LatentShape gen_latent_shape(Rng& rng, int h, int w);

// Blur sigma of a sample generated from `seed`, recovered without rerunning
// the generator.
double blur_sigma_for_seed(std::uint64_t seed);

// Applies the profile's offset then a fresh elastic displacement. Returns
// nullopt when erosion (or displacement) leaves no foreground: the caller
// should regenerate the sample.
std::optional<MaskGrid> annotate(const MaskGrid& latent_mask, const AnnotatorProfile& profile,
                                 Rng& rng);

void validate_profile(const AnnotatorProfile& profile, int h, int w);

// One complete sample from a single seed; nullopt propagates annotate's
// regenerate signal.
std::optional<MultiRaterSample> generate_sample(std::uint64_t seed, int h, int w,
                                                const std::vector<AnnotatorProfile>& profiles);

struct DatasetConfig {
  int samples = 250;
  int height = 64;
  int width = 64;
  std::vector<AnnotatorProfile> profiles = default_profiles();
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;

  static std::vector<AnnotatorProfile> default_profiles();
  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};
SplitSizes split_sizes(std::size_t n, double train, double val);

Dataset build_dataset(const DatasetConfig& config, std::uint64_t master_seed);

// GDS1 container.
inline constexpr std::uint32_t kContainerVersion = 1;
std::vector<std::uint8_t> encode_container(const Dataset& dataset);
Dataset decode_container(const std::vector<std::uint8_t>& bytes);
void write_container(const Dataset& dataset, const std::string& path);
Dataset read_container(const std::string& path);

}  // namespace gds
