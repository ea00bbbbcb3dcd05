#include "gds/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gds/morphology.hpp"

namespace gds {

namespace {

void require_panel(std::span<const MaskGrid> masks, std::size_t min_count, const char* what) {
  if (masks.size() < min_count) {
    throw ParameterError(std::string(what) + ": needs at least " + std::to_string(min_count) +
                         " masks, got " + std::to_string(masks.size()));
  }
  for (const auto& m : masks) require_same_extents(m, masks.front(), what);
}

// Region-restricted copy of a mask, one byte per region pixel.
std::vector<std::uint8_t> restrict_to(const MaskGrid& m, const std::vector<std::size_t>& pixels) {
  std::vector<std::uint8_t> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = m.data[pixels[i]] != 0;
  return out;
}

double iou_distance_packed(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
  }
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

// Pair distances are summed in sorted order so the result depends only on the
// multisets, not on the order of masks within each set.
double mean_pairwise(const std::vector<std::vector<std::uint8_t>>& xs,
                     const std::vector<std::vector<std::uint8_t>>& ys) {
  std::vector<double> d;
  d.reserve(xs.size() * ys.size());
  for (const auto& x : xs)
    for (const auto& y : ys) d.push_back(iou_distance_packed(x, y));
  std::sort(d.begin(), d.end());
  double total = 0.0;
  for (double v : d) total += v;
  return total / static_cast<double>(d.size());
}

}  // namespace

double binary_entropy_bits(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

EntropyMap entropy_map(std::span<const MaskGrid> annotations) {
  require_panel(annotations, 2, "entropy_map");
  const auto& first = annotations.front();
  EntropyMap out(first.height, first.width, 0.0);
  const double n = static_cast<double>(annotations.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    int votes = 0;
    for (const auto& a : annotations) votes += a.data[i] != 0;
    out.data[i] = binary_entropy_bits(votes / n);
  }
  return out;
}

MaskGrid RegionPartition::mask(Region r) const {
  MaskGrid m(labels.height, labels.width, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = labels.data[i] == r;
  return m;
}

std::size_t RegionPartition::count(Region r) const {
  return static_cast<std::size_t>(std::count(labels.data.begin(), labels.data.end(), r));
}

RegionPartition partition(const EntropyMap& entropy, std::span<const MaskGrid> annotations,
                          double threshold, int roi_radius) {
  if (threshold < 0.0) throw ParameterError("partition: threshold must be >= 0");
  if (roi_radius < 0) throw ParameterError("partition: roi radius must be >= 0");
  require_panel(annotations, 1, "partition");
  require_same_extents(entropy, annotations.front(), "partition");
  MaskGrid uni(entropy.height, entropy.width, 0);
  for (const auto& a : annotations)
    for (std::size_t i = 0; i < uni.size(); ++i) uni.data[i] |= a.data[i] != 0;
  const MaskGrid roi = roi_radius > 0 ? dilate_disk(uni, roi_radius) : uni;

  RegionPartition p;
  p.threshold = threshold;
  p.roi_radius = roi_radius;
  p.labels = Grid<Region>(entropy.height, entropy.width, Region::kExcluded);
  for (std::size_t i = 0; i < roi.size(); ++i) {
    if (!roi.data[i]) continue;
    p.labels.data[i] = entropy.data[i] > threshold ? Region::kAmbiguous : Region::kCertain;
  }
  return p;
}

std::optional<double> soft_dice_score(const ImageGrid& pred, const ImageGrid& target,
                                      const MaskGrid& region) {
  require_same_extents(pred, target, "soft_dice_score");
  require_same_extents(pred, region, "soft_dice_score");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region.data[i]) continue;
    any = true;
    inter += std::min(pred.data[i], target.data[i]);
    sp += pred.data[i];
    sg += target.data[i];
  }
  if (!any) return std::nullopt;
  if (sp + sg == 0.0) return 1.0;
  return 2.0 * inter / (sp + sg);
}

double iou_distance(const MaskGrid& a, const MaskGrid& b, const MaskGrid& region) {
  require_same_extents(a, b, "iou_distance");
  require_same_extents(a, region, "iou_distance");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region.data[i]) continue;
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> ged(std::span<const MaskGrid> samples, std::span<const MaskGrid> annotations,
                          const MaskGrid& region) {
  require_panel(samples, 1, "ged");
  require_panel(annotations, 1, "ged");
  require_same_extents(samples.front(), annotations.front(), "ged");
  require_same_extents(samples.front(), region, "ged");
  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region.data[i]) pixels.push_back(i);
  }
  if (pixels.empty()) return std::nullopt;
  std::vector<std::vector<std::uint8_t>> s, y;
  for (const auto& m : samples) s.push_back(restrict_to(m, pixels));
  for (const auto& m : annotations) y.push_back(restrict_to(m, pixels));
  const double cross = mean_pairwise(s, y);
  const double within_s = mean_pairwise(s, s);
  const double within_y = mean_pairwise(y, y);
  return std::max(0.0, 2.0 * cross - (within_s + within_y));
}

MaskGrid threshold_map(const ImageGrid& prob, double level) {
  MaskGrid m(prob.height, prob.width, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = prob.data[i] >= level;
  return m;
}

ImageGrid mean_map(std::span<const MaskGrid> masks) {
  require_panel(masks, 1, "mean_map");
  ImageGrid out(masks.front().height, masks.front().width, 0.0);
  for (const auto& m : masks)
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += m.data[i] != 0;
  for (auto& v : out.data) v /= static_cast<double>(masks.size());
  return out;
}

std::optional<double> region_mean(const ImageGrid& values, const MaskGrid& region) {
  require_same_extents(values, region, "region_mean");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region.data[i]) continue;
    total += values.data[i];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

}  // namespace gds
