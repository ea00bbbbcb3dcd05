#include "gds/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gds/checkpoint.hpp"
#include "gds/errors.hpp"
#include "gds/export.hpp"
#include "gds/metrics.hpp"

namespace gds {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
constexpr std::uint64_t kTrainStream = 0x7472616e;  // "tran"
constexpr std::size_t kEvalBatch = 16;

struct Batch {
  Tensor x, y, one_hot;
};

// Rows paired with annotation slots; the one-hot position is the annotator id.
Batch assemble(const Dataset& data, const std::vector<std::pair<std::size_t, std::size_t>>& picks,
               int num_annotators) {
  const auto& first = data.samples.at(picks.front().first);
  const int h = first.height(), w = first.width();
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<double> x(picks.size() * plane), y(picks.size() * plane);
  std::vector<int> ids;
  for (std::size_t b = 0; b < picks.size(); ++b) {
    const auto& s = data.samples.at(picks[b].first);
    if (s.height() != h || s.width() != w) {
      throw ShapeError("training batch mixes image extents " + std::to_string(h) + "x" + std::to_string(w) +
                       " and " + std::to_string(s.height()) + "x" + std::to_string(s.width()));
    }
    const auto& ann = s.annotations.at(picks[b].second);
    std::copy(s.image.data.begin(), s.image.data.end(), x.begin() + static_cast<std::ptrdiff_t>(b * plane));
    for (std::size_t i = 0; i < plane; ++i) y[b * plane + i] = ann.data[i] != 0;
    ids.push_back(s.annotator_ids.at(picks[b].second));
  }
  const int n = static_cast<int>(picks.size());
  return {Tensor::from_values({n, 1, h, w}, std::move(x)), Tensor::from_values({n, 1, h, w}, std::move(y)),
          one_hot(ids, num_annotators)};
}

ImageGrid plane_of(std::span<const double> v, std::size_t b, int h, int w) {
  ImageGrid g(h, w);
  const std::size_t plane = g.size();
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(b * plane),
            v.begin() + static_cast<std::ptrdiff_t>((b + 1) * plane), g.data.begin());
  return g;
}

void check_gradients(const ParamStore& params) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in parameter '" + name + "'");
    }
  }
}

void check_annotators(const Dataset& data, int num_annotators) {
  for (const auto& p : data.profiles) {
    if (p.id >= static_cast<std::uint32_t>(num_annotators)) {
      throw ConfigError("model.num_annotators", "annotator id " + std::to_string(p.id) +
                                                    " does not fit a model with " +
                                                    std::to_string(num_annotators) + " annotators");
    }
  }
}

void append_history(const std::filesystem::path& path, const EpochRecord& r, bool fresh) {
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  if (fresh) out << csv_row({"epoch", "train_dice_loss", "train_kl", "val_dice"});
  out << csv_row({std::to_string(r.epoch), format_double(r.train_dice_loss), format_double(r.train_kl),
                  std::isnan(r.val_dice) ? std::string() : format_double(r.val_dice)});
}

}  // namespace

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kEsgOnly: return "esg_only";
    case Ablation::kScmOnly: return "scm_only";
  }
  return "full";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "esg_only") return Ablation::kEsgOnly;
  if (s == "scm_only") return Ablation::kScmOnly;
  throw ParameterError("unknown ablation '" + s + "' (expected full, esg_only or scm_only)");
}

std::string annotator_sampling_name(AnnotatorSampling s) {
  return s == AnnotatorSampling::kAll ? "all" : "uniform";
}

AnnotatorSampling parse_annotator_sampling(const std::string& s) {
  if (s == "uniform") return AnnotatorSampling::kUniform;
  if (s == "all") return AnnotatorSampling::kAll;
  throw ParameterError("unknown annotator sampling '" + s + "' (expected uniform or all)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr", "must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps", "must be > 0");
  if (!(kl_weight >= 0.0)) throw ConfigError("train.kl_weight", "must be >= 0");
  if (kl_warmup_epochs < 0 || kl_warmup_epochs > epochs) {
    throw ConfigError("train.kl_warmup_epochs", "must lie in [0, epochs]");
  }
  if (!(dice_smooth > 0.0)) throw ConfigError("train.dice_smooth", "must be > 0");
}

Tensor soft_dice_loss(const Tensor& pred_prob, const Tensor& target, double smooth) {
  if (pred_prob.shape() != target.shape() || pred_prob.rank() != 4) {
    throw ShapeError("soft_dice_loss: prediction " + shape_str(pred_prob.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  if (!(smooth > 0.0)) throw ParameterError("soft_dice_loss: smooth must be > 0");
  const std::vector<int> axes{1, 2, 3};
  Tensor inter = sum(mul(pred_prob, target), axes);
  Tensor denom = add_scalar(add(sum(pred_prob, axes), sum(target, axes)), smooth);
  return add_scalar(mul_scalar(div(add_scalar(mul_scalar(inter, 2.0), smooth), denom), -1.0), 1.0);
}

double kl_weight_at(const TrainConfig& config, int epoch) {
  if (config.kl_warmup_epochs == 0) return config.kl_weight;
  return config.kl_weight * std::min(1.0, static_cast<double>(epoch) / config.kl_warmup_epochs);
}

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
                 std::int64_t step, const AdamHyper& h) {
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g.empty() ? 0.0 : g[i];
    p[i] -= h.lr * h.weight_decay * p[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
    p[i] -= h.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
  }
}

AdamState make_adam_state(const ParamStore& params) {
  AdamState s;
  for (const auto& [name, t] : params) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

void adam_step(ParamStore& params, AdamState& state, const AdamHyper& hyper) {
  if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  ++state.step;
  std::size_t i = 0;
  for (auto& [name, t] : params) {
    std::span<const double> g = t.has_grad() ? t.grad() : std::span<const double>();
    adam_update(t.mutable_values(), g, state.m[i], state.v[i], state.step, hyper);
    ++i;
  }
}

StepLosses training_step(GdsModel& model, AdamState& opt, const Dataset& data,
                         const std::vector<std::size_t>& rows, const TrainConfig& config, int epoch, Rng& rng) {
  if (rows.empty()) throw ParameterError("training_step: empty batch");
  std::vector<std::pair<std::size_t, std::size_t>> picks;
  for (std::size_t r : rows) {
    const auto n = data.samples.at(r).annotations.size();
    if (n == 0) throw ContractError("training_step: sample " + std::to_string(r) + " has no annotations");
    if (config.annotator_sampling == AnnotatorSampling::kAll) {
      for (std::size_t k = 0; k < n; ++k) picks.emplace_back(r, k);
    } else {
      picks.emplace_back(r, static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1)));
    }
  }
  Batch batch = assemble(data, picks, model.config.num_annotators);
  const int h = batch.x.extent(2), w = batch.x.extent(3);

  model.params.zero_grad();
  const FeaturePyramid pyramid = backbone_forward(batch.x, model.params);
  const GaussianParams prior = prior_forward(batch.x, model.params);
  Tensor e, kl;
  if (config.ablation == Ablation::kScmOnly) {
    e = sample_signature(prior, rng).e;
  } else {
    const GaussianParams q = posterior_forward(batch.x, batch.y, batch.one_hot, model.params);
    e = sample_signature(q, rng, SignatureSource::kPosterior).e;
    kl = kl_divergence(q, prior);
  }
  Tensor prob = sigmoid(fuse_decode(pyramid, e, model.params, h, w, model.config.use_attention));
  Tensor dice = soft_dice_loss(prob, batch.y, config.dice_smooth);
  Tensor per_sample = kl.defined() ? add(dice, mul_scalar(kl, kl_weight_at(config, epoch))) : dice;
  Tensor total = mean(per_sample);
  total.backward();
  check_gradients(model.params);
  adam_step(model.params, opt,
            {config.lr, config.beta1, config.beta2, config.adam_eps, config.weight_decay});
  return {mean(dice).item(), kl.defined() ? mean(kl).item() : 0.0, total.item()};
}

double validation_dice(const GdsModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                       Ablation ablation) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard no_grad;
  const std::size_t raters = data.samples.at(rows.front()).annotations.size();
  double total = 0.0;
  std::size_t count = 0;
  auto score = [&](const Tensor& logits, const std::vector<std::pair<std::size_t, std::size_t>>& picks,
                   bool all_raters) {
    const int h = logits.extent(2), w = logits.extent(3);
    const MaskGrid region(h, w, 1);
    auto v = logits.values();
    for (std::size_t i = 0; i < picks.size(); ++i) {
      ImageGrid prob = plane_of(v, i, h, w);
      for (auto& p : prob.data) p = stable_sigmoid(p);
      const auto& s = data.samples[picks[i].first];
      for (std::size_t a = 0; a < s.annotations.size(); ++a) {
        if (!all_raters && a != picks[i].second) continue;
        ImageGrid target(h, w);
        for (std::size_t p = 0; p < target.size(); ++p) target.data[p] = s.annotations[a].data[p] != 0;
        total += *soft_dice_score(prob, target, region);
        ++count;
      }
    }
  };
  for (std::size_t start = 0; start < rows.size(); start += kEvalBatch) {
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    for (std::size_t i = start; i < std::min(rows.size(), start + kEvalBatch); ++i) {
      if (data.samples.at(rows[i]).annotations.size() != raters) {
        throw ContractError("validation_dice: samples carry different numbers of annotations");
      }
      picks.emplace_back(rows[i], 0);
    }
    const Batch images = assemble(data, picks, model.config.num_annotators);
    const int h = images.x.extent(2), w = images.x.extent(3);
    const FeaturePyramid pyramid = backbone_forward(images.x, model.params);
    if (ablation == Ablation::kScmOnly) {
      // The prior mean ignores the annotation, so one decode serves every rater.
      Tensor mu = prior_forward(images.x, model.params).mu;
      score(fuse_decode(pyramid, mu, model.params, h, w, model.config.use_attention), picks, true);
      continue;
    }
    for (std::size_t k = 0; k < raters; ++k) {
      for (auto& p : picks) p.second = k;
      const Batch b = assemble(data, picks, model.config.num_annotators);
      Tensor mu = posterior_forward(b.x, b.y, b.one_hot, model.params).mu;
      score(fuse_decode(pyramid, mu, model.params, h, w, model.config.use_attention), picks, false);
    }
  }
  return total / static_cast<double>(count);
}

TrainState init_training(const ModelConfig& model_config, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  ModelConfig mc = model_config;
  mc.use_attention = config.ablation != Ablation::kEsgOnly;
  Rng init(derive_seed(seed, kInitStream));
  TrainState state{make_model(mc, init), {}, config, Rng(derive_seed(seed, kTrainStream))};
  state.opt = make_adam_state(state.model.params);
  return state;
}

std::vector<EpochRecord> fit(TrainState& state, const Dataset& data, const FitOptions& options) {
  state.config.validate();
  if (state.opt.m.empty()) state.opt = make_adam_state(state.model.params);
  const auto train_rows = data.indices(Split::kTrain);
  if (train_rows.empty()) throw ConfigError("data.split_train", "training split is empty");
  check_annotators(data, state.model.config.num_annotators);
  const auto val_rows = data.indices(Split::kVal);
  const bool fresh_history = state.epoch == 0;
  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);

  std::vector<EpochRecord> history;
  for (int epoch = state.epoch + 1; epoch <= state.config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    std::vector<std::size_t> order = train_rows;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(state.rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    const std::size_t bs = static_cast<std::size_t>(state.config.batch_size);
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      StepLosses l;
      try {
        l = training_step(state.model, state.opt, data, rows, state.config, epoch, state.rng);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("training aborted at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(steps + 1) + ": " + e.what());
      }
      rec.train_dice_loss += l.dice;
      rec.train_kl += l.kl;
      rec.step_losses.push_back(l.total);
      ++steps;
    }
    rec.train_dice_loss /= static_cast<double>(steps);
    rec.train_kl /= static_cast<double>(steps);
    rec.val_dice = validation_dice(state.model, data, val_rows, state.config.ablation);
    state.epoch = epoch;

    const bool improved = val_rows.empty() || rec.val_dice > state.best_val_dice;
    if (improved) {
      state.best_val_dice = val_rows.empty() ? state.best_val_dice : rec.val_dice;
      state.best_epoch = epoch;
    }
    if (options.out_dir) {
      const Checkpoint ckpt = capture(state);
      if (improved) save_checkpoint(ckpt, (*options.out_dir / "best.gdsc").string());
      save_checkpoint(ckpt, (*options.out_dir / "last.gdsc").string());
      append_history(*options.out_dir / "history.csv", rec, fresh_history && epoch == 1);
    }
    if (options.on_epoch) options.on_epoch(rec);
    history.push_back(std::move(rec));
  }
  return history;
}

}  // namespace gds
