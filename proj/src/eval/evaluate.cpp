#include "gds/evaluate.hpp"

#include <algorithm>
#include <thread>

#include "gds/errors.hpp"
#include "gds/export.hpp"

namespace gds {

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;  // "eval"

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

struct Mean {
  double total = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (!v) return;
    total += *v;
    ++n;
  }
  double value() const { return n ? total / static_cast<double>(n) : 0.0; }
};

}  // namespace

Tensor image_tensor(const MultiRaterSample& sample) {
  return Tensor::from_values({1, 1, sample.height(), sample.width()}, sample.image.data);
}

PanelResult ModelSource::panel(const MultiRaterSample& sample, int m, Rng& rng) const {
  return sample_panel(image_tensor(sample), m, rng, model_);
}

PanelResult OracleSource::panel(const MultiRaterSample& sample, int, Rng&) const {
  PanelResult p;
  for (const auto& a : sample.annotations) {
    ImageGrid h(a.height, a.width);
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] = a.data[i] != 0;
    p.hypotheses.push_back(std::move(h));
  }
  if (p.hypotheses.empty()) throw ContractError("oracle panel: sample has no annotations");
  panel_statistics(p);
  return p;
}

SampleMetrics evaluate_sample(const PanelResult& panel, const MultiRaterSample& sample, std::size_t sample_id,
                              const EvalConfig& config) {
  if (panel.hypotheses.empty()) throw ParameterError("evaluate_sample: empty panel");
  require_same_extents(panel.hypotheses.front(), sample.image, "evaluate_sample");
  const auto entropy = entropy_map(sample.annotations);
  const auto parts = partition(entropy, sample.annotations, config.entropy_threshold, config.roi_radius);
  const MaskGrid amb = parts.mask(Region::kAmbiguous);
  const MaskGrid cert = parts.mask(Region::kCertain);
  std::vector<MaskGrid> masks;
  for (const auto& h : panel.hypotheses) masks.push_back(threshold_map(h, 0.5));
  const ImageGrid target = mean_map(sample.annotations);

  SampleMetrics row;
  row.sample_id = sample_id;
  row.ged_amb = ged(masks, sample.annotations, amb);
  row.ged_cert = ged(masks, sample.annotations, cert);
  row.dice_amb = soft_dice_score(panel.consensus, target, amb);
  row.dice_cert = soft_dice_score(panel.consensus, target, cert);
  row.amb_pixels = parts.count(Region::kAmbiguous);
  row.cert_pixels = parts.count(Region::kCertain);
  row.dispersion_amb = region_mean(panel.dispersion, amb);
  row.dispersion_cert = region_mean(panel.dispersion, cert);
  return row;
}

RegionMetrics aggregate(const std::vector<SampleMetrics>& rows) {
  Mean ga, da, gc, dc, sa, sc;
  for (const auto& r : rows) {
    ga.add(r.ged_amb);
    da.add(r.dice_amb);
    gc.add(r.ged_cert);
    dc.add(r.dice_cert);
    sa.add(r.dispersion_amb);
    sc.add(r.dispersion_cert);
  }
  return {ga.value(), da.value(), gc.value(), dc.value(), ga.n, da.n, gc.n, dc.n, sa.value(), sc.value()};
}

EvalReport evaluate(const HypothesisSource& source, const Dataset& data, const EvalConfig& config,
                    std::uint64_t seed, int threads) {
  if (config.panel_size < 1) throw ConfigError("eval.panel_size", "must be >= 1");
  if (config.roi_radius < 0) throw ConfigError("eval.roi_radius", "must be >= 0");
  if (!(config.entropy_threshold >= 0.0)) throw ConfigError("eval.entropy_threshold", "must be >= 0");
  const auto rows = data.indices(config.split);
  if (rows.empty()) throw ConfigError("eval.split", std::string("the ") + split_name(config.split) + " split is empty");

  EvalReport report;
  report.samples.resize(rows.size());
  std::vector<std::exception_ptr> errors(rows.size());
  auto work = [&](std::size_t i) {
    try {
      Rng rng(derive_seed(seed, kEvalStream, i));
      const auto& s = data.samples[rows[i]];
      report.samples[i] = evaluate_sample(source.panel(s, config.panel_size, rng), s, rows[i], config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, rows.size());
  if (n_threads == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < rows.size(); i += n_threads) work(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.summary = aggregate(report.samples);
  return report;
}

std::string per_sample_csv(const std::vector<SampleMetrics>& rows) {
  std::string out = csv_row({"sample_id", "ged_amb", "dice_amb", "ged_cert", "dice_cert", "amb_pixel_count",
                             "cert_pixel_count", "mean_dispersion_amb", "mean_dispersion_cert"});
  for (const auto& r : rows) {
    out += csv_row({std::to_string(r.sample_id), opt_str(r.ged_amb), opt_str(r.dice_amb), opt_str(r.ged_cert),
                    opt_str(r.dice_cert), std::to_string(r.amb_pixels), std::to_string(r.cert_pixels),
                    opt_str(r.dispersion_amb), opt_str(r.dispersion_cert)});
  }
  return out;
}

std::string summary_csv(const std::string& method, const RegionMetrics& s) {
  return csv_row({"method", "ged_ambiguous", "dice_ambiguous", "ged_certain", "dice_certain",
                  "samples_ged_ambiguous", "samples_dice_ambiguous", "samples_ged_certain",
                  "samples_dice_certain", "mean_dispersion_ambiguous", "mean_dispersion_certain"}) +
         csv_row({method, format_double(s.ged_ambiguous), format_double(s.dice_ambiguous),
                  format_double(s.ged_certain), format_double(s.dice_certain), std::to_string(s.n_ged_ambiguous),
                  std::to_string(s.n_dice_ambiguous), std::to_string(s.n_ged_certain),
                  std::to_string(s.n_dice_certain), format_double(s.dispersion_ambiguous),
                  format_double(s.dispersion_certain)});
}

}  // namespace gds
