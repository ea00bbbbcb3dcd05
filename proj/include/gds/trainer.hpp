#pragma once

// Optimization of the full model: soft Dice reconstruction plus a warmed-up
// KL term between the annotator-conditioned posterior and the image prior.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gds/scm.hpp"
#include "gds/synth.hpp"

namespace gds {

enum class Ablation { kFull, kEsgOnly, kScmOnly };
enum class AnnotatorSampling { kUniform, kAll };

std::string ablation_name(Ablation a);
Ablation parse_ablation(const std::string& s);
std::string annotator_sampling_name(AnnotatorSampling s);
AnnotatorSampling parse_annotator_sampling(const std::string& s);

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 30;
  int batch_size = 8;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double kl_weight = 1.0;
  int kl_warmup_epochs = 10;
  double dice_smooth = 1.0;
  Ablation ablation = Ablation::kFull;
  AnnotatorSampling annotator_sampling = AnnotatorSampling::kUniform;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Per-sample 1 - (2 sum p*g + smooth) / (sum p + sum g + smooth) over
// [B,1,H,W] maps; returns [B].
Tensor soft_dice_loss(const Tensor& pred_prob, const Tensor& target, double smooth = 1.0);

// KL weight for a 1-based epoch: beta * min(1, epoch / warmup).
double kl_weight_at(const TrainConfig& config, int epoch);

struct AdamHyper {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
};

// One decoupled-decay Adam update of a flat buffer: p -= lr*wd*p, then the
// bias-corrected Adam step. `step` is the 1-based update count.
void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, std::int64_t step, const AdamHyper& h);

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m, v;  // aligned with ParamStore order
};

AdamState make_adam_state(const ParamStore& params);

// Applies one update to every parameter using its accumulated gradient
// (missing gradients count as zero).
void adam_step(ParamStore& params, AdamState& state, const AdamHyper& hyper);

struct StepLosses {
  double dice = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

// One optimization step over the given dataset rows. `epoch` is 1-based.
StepLosses training_step(GdsModel& model, AdamState& opt, const Dataset& data,
                         const std::vector<std::size_t>& rows, const TrainConfig& config, int epoch,
                         Rng& rng);

// Mean soft Dice of the posterior-mean reconstruction (prior mean for
// scm_only) against every annotation of every row.
double validation_dice(const GdsModel& model, const Dataset& data,
                       const std::vector<std::size_t>& rows, Ablation ablation);

struct EpochRecord {
  int epoch = 0;
  double train_dice_loss = 0.0;
  double train_kl = 0.0;
  double val_dice = 0.0;  // NaN when the validation split is empty
  std::vector<double> step_losses;
};

// Everything needed to continue training bit-exactly.
struct TrainState {
  GdsModel model;
  AdamState opt;
  TrainConfig config;
  Rng rng;
  int epoch = 0;  // completed epochs
  double best_val_dice = -1.0;
  int best_epoch = 0;
};

TrainState init_training(const ModelConfig& model_config, const TrainConfig& config,
                         std::uint64_t seed);

struct FitOptions {
  std::optional<std::filesystem::path> out_dir;  // best.gdsc, last.gdsc, history.csv
  std::function<void(const EpochRecord&)> on_epoch;
};

// Runs epochs state.epoch+1 .. state.config.epochs.
std::vector<EpochRecord> fit(TrainState& state, const Dataset& data, const FitOptions& options = {});

}  // namespace gds
