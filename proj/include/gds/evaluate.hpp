#pragma once

// Region-partitioned evaluation of hypothesis panels over a dataset split.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gds/config.hpp"
#include "gds/metrics.hpp"
#include "gds/scm.hpp"

namespace gds {

class HypothesisSource {
 public:
  virtual ~HypothesisSource() = default;
  virtual PanelResult panel(const MultiRaterSample& sample, int m, Rng& rng) const = 0;
};

// Prior sampling from a trained model.
class ModelSource : public HypothesisSource {
 public:
  explicit ModelSource(const GdsModel& model) : model_(model) {}
  PanelResult panel(const MultiRaterSample& sample, int m, Rng& rng) const override;

 private:
  const GdsModel& model_;
};

// Returns the rater masks themselves as hypotheses; validates the metric
// pipeline without a model.
class OracleSource : public HypothesisSource {
 public:
  PanelResult panel(const MultiRaterSample& sample, int m, Rng& rng) const override;
};

Tensor image_tensor(const MultiRaterSample& sample);

struct SampleMetrics {
  std::size_t sample_id = 0;
  std::optional<double> ged_amb, dice_amb, ged_cert, dice_cert;
  std::size_t amb_pixels = 0, cert_pixels = 0;
  std::optional<double> dispersion_amb, dispersion_cert;

  bool operator==(const SampleMetrics&) const = default;
};

struct RegionMetrics {
  double ged_ambiguous = 0.0, dice_ambiguous = 0.0, ged_certain = 0.0, dice_certain = 0.0;
  std::size_t n_ged_ambiguous = 0, n_dice_ambiguous = 0, n_ged_certain = 0, n_dice_certain = 0;
  double dispersion_ambiguous = 0.0, dispersion_certain = 0.0;
};

struct EvalReport {
  std::vector<SampleMetrics> samples;
  RegionMetrics summary;
};

// Panel for one sample: hypotheses thresholded at 0.5 for GED, consensus
// against the mean rater map for soft Dice.
SampleMetrics evaluate_sample(const PanelResult& panel, const MultiRaterSample& sample, std::size_t sample_id,
                              const EvalConfig& config);

// Means over the samples where each metric is defined.
RegionMetrics aggregate(const std::vector<SampleMetrics>& rows);

// Sample i of the split draws its panel from Rng(derive_seed(seed, eval stream, i)),
// so results do not depend on `threads`.
EvalReport evaluate(const HypothesisSource& source, const Dataset& data, const EvalConfig& config,
                    std::uint64_t seed, int threads = 1);

std::string per_sample_csv(const std::vector<SampleMetrics>& rows);
std::string summary_csv(const std::string& method, const RegionMetrics& summary);

}  // namespace gds
