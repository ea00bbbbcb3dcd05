#pragma once

// Region-partitioned evaluation of multi-hypothesis segmentations against a
// panel of rater masks.

#include <cstdint>
#include <optional>
#include <span>

#include "gds/grid.hpp"

namespace gds {

// Per-pixel binary entropy (bits) of the rater mean p = (1/N) sum y_i.
using EntropyMap = ImageGrid;

EntropyMap entropy_map(std::span<const MaskGrid> annotations);

double binary_entropy_bits(double p);

enum class Region : std::uint8_t { kExcluded = 0, kAmbiguous = 1, kCertain = 2 };

struct RegionPartition {
  Grid<Region> labels;
  double threshold = 0.0;
  int roi_radius = 5;

  MaskGrid mask(Region r) const;
  std::size_t count(Region r) const;
};

inline constexpr double kDefaultEntropyThreshold = 0.0;
inline constexpr int kDefaultRoiRadius = 5;

// ROI = disk dilation of the union of rater foregrounds; inside the ROI,
// entropy > threshold is ambiguous and the rest is certain.
RegionPartition partition(const EntropyMap& entropy, std::span<const MaskGrid> annotations,
                          double threshold = kDefaultEntropyThreshold,
                          int roi_radius = kDefaultRoiRadius);

// Soft Dice restricted to `region`: 2 * sum min(p, g) / (sum p + sum g), with
// fuzzy-set intersection so that identical soft maps score 1. Equals the
// product form 2 * sum p*g / (...) whenever either map is binary. Returns 1
// when both restricted sums vanish and nullopt for an empty region.
std::optional<double> soft_dice_score(const ImageGrid& pred, const ImageGrid& target,
                                      const MaskGrid& region);

// Squared generalized energy distance with d = 1 - IoU restricted to
// `region` (IoU of two empty sets is 1). Expectations are exact averages over
// all ordered pairs, self-pairs included. nullopt for an empty region.
std::optional<double> ged(std::span<const MaskGrid> samples, std::span<const MaskGrid> annotations,
                          const MaskGrid& region);

// 1 - IoU of a and b restricted to region.
double iou_distance(const MaskGrid& a, const MaskGrid& b, const MaskGrid& region);

MaskGrid threshold_map(const ImageGrid& prob, double level = 0.5);
ImageGrid mean_map(std::span<const MaskGrid> masks);
std::optional<double> region_mean(const ImageGrid& values, const MaskGrid& region);

}  // namespace gds
