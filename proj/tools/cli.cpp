#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

#include "gds/binary_io.hpp"
#include "gds/checkpoint.hpp"
#include "gds/config.hpp"
#include "gds/errors.hpp"
#include "gds/evaluate.hpp"
#include "gds/export.hpp"

namespace gds::cli {

namespace {

namespace fs = std::filesystem;

// Bad invocation detected after argument parsing (exit status 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

AppConfig effective_config(const Globals& g) {
  AppConfig c = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path.string(), std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

int cmd_gen(const Globals& g, const std::string& out_path, std::ostream& out) {
  const AppConfig c = effective_config(g);
  const Dataset ds = build_dataset(c.data, c.seed);
  write_container(ds, out_path);
  out << "wrote " << out_path << ": " << ds.samples.size() << " samples (" << ds.indices(Split::kTrain).size()
      << " train, " << ds.indices(Split::kVal).size() << " val, " << ds.indices(Split::kTest).size()
      << " test), " << c.data.height << "x" << c.data.width << ", seed " << c.seed << "\n";
  for (const auto& p : ds.profiles) {
    out << "  annotator " << p.id << ": offset " << format_double(p.systematic_offset) << " px, jitter ["
        << format_double(p.jitter_lo) << ", " << format_double(p.jitter_hi) << "] px\n";
  }
  return kExitOk;
}

int annotator_count(const Dataset& ds) {
  std::uint32_t n = 0;
  for (const auto& p : ds.profiles) n = std::max(n, p.id + 1);
  return static_cast<int>(n);
}

struct TrainArgs {
  std::string data, out_dir, ablation, from;
  std::optional<int> epochs;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  AppConfig c = effective_config(g);
  if (!a.ablation.empty()) {
    try {
      c.train.ablation = parse_ablation(a.ablation);
    } catch (const ParameterError& e) {
      throw UsageError(std::string("--ablation: ") + e.what());
    }
  }
  if (a.epochs) {
    // A short --epochs run keeps the configured warmup no longer than the run.
    c.train.epochs = *a.epochs;
    c.train.kl_warmup_epochs = std::min(c.train.kl_warmup_epochs, c.train.epochs);
  }
  const Dataset ds = read_container(a.data);
  c.model.num_annotators = annotator_count(ds);

  TrainState state = a.from.empty()
                         ? init_training(c.model, c.train, c.seed)
                         : restore_training(load_checkpoint(a.from), &c.train,
                                            [&](const std::string& w) { err << "warning: " << w << "\n"; });
  out << "effective configuration:\n";
  for (const auto& [k, v] : settings_of(c)) out << "  " << k << " = " << v << "\n";
  for (const auto& [k, v] : model_echo(state.model.config)) {
    if (k == "model.num_annotators" || k == "model.use_attention") out << "  " << k << " = " << v << "\n";
  }
  if (!a.from.empty()) out << "resuming after epoch " << state.epoch << "\n";

  FitOptions opts;
  opts.out_dir = fs::path(a.out_dir);
  opts.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << "  dice_loss " << fixed(r.train_dice_loss) << "  kl " << fixed(r.train_kl)
        << "  val_dice " << (std::isnan(r.val_dice) ? std::string("n/a") : fixed(r.val_dice)) << std::endl;
  };
  fit(state, ds, opts);
  out << "best epoch " << state.best_epoch << " (val_dice " << fixed(state.best_val_dice) << "); wrote "
      << (fs::path(a.out_dir) / "best.gdsc").string() << "\n";
  return kExitOk;
}

struct SampleArgs {
  std::string checkpoint, data, out_dir;
  long long sample_id = -1;
  int m = 8;
};

int cmd_sample(const Globals& g, const SampleArgs& a, std::ostream& out) {
  const AppConfig c = effective_config(g);
  if (a.m < 1) throw UsageError("-m must be >= 1");
  const Dataset ds = read_container(a.data);
  if (a.sample_id < 0 || static_cast<std::size_t>(a.sample_id) >= ds.samples.size()) {
    throw UsageError("unknown sample id " + std::to_string(a.sample_id) + " (corpus has " +
                     std::to_string(ds.samples.size()) + " samples)");
  }
  const GdsModel model = restore_model(load_checkpoint(a.checkpoint));
  const auto& s = ds.samples[static_cast<std::size_t>(a.sample_id)];
  Rng rng(derive_seed(c.seed, static_cast<std::uint64_t>(a.sample_id)));
  const PanelResult p = sample_panel(image_tensor(s), a.m, rng, model);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::string csv = csv_row({"map", "foreground_area", "mean_dispersion_ambiguous", "mean_dispersion_certain"});
  auto area = [](const ImageGrid& m) { return std::to_string(foreground_count(threshold_map(m, 0.5))); };
  for (std::size_t k = 0; k < p.hypotheses.size(); ++k) {
    std::ostringstream name;
    name << "hypothesis_" << std::setw(2) << std::setfill('0') << k;
    write_pgm((dir / (name.str() + ".pgm")).string(), p.hypotheses[k]);
    csv += csv_row({name.str(), area(p.hypotheses[k]), "", ""});
  }
  write_pgm((dir / "consensus.pgm").string(), p.consensus);
  // Dispersion of maps in [0, 1] never exceeds 0.5.
  write_pgm((dir / "dispersion.pgm").string(), p.dispersion, 2.0 * 255.0);
  csv += csv_row({"consensus", area(p.consensus), "", ""});

  std::string amb, cert;
  if (s.annotations.size() >= 2) {
    const auto parts = partition(entropy_map(s.annotations), s.annotations, c.eval.entropy_threshold,
                                 c.eval.roi_radius);
    const auto da = region_mean(p.dispersion, parts.mask(Region::kAmbiguous));
    const auto dc = region_mean(p.dispersion, parts.mask(Region::kCertain));
    amb = da ? format_double(*da) : "";
    cert = dc ? format_double(*dc) : "";
  }
  csv += csv_row({"dispersion", "", amb, cert});
  write_text(dir / "summary.csv", csv);
  out << "wrote " << p.hypotheses.size() + 2 << " PGM maps and summary.csv to " << dir.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, data, out_dir;
  bool oracle = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  const AppConfig c = effective_config(g);
  if (a.oracle == !a.checkpoint.empty()) throw UsageError("give exactly one of --checkpoint or --oracle");
  const Dataset ds = read_container(a.data);
  std::optional<GdsModel> model;
  std::unique_ptr<HypothesisSource> source;
  std::string method = "oracle";
  if (a.oracle) {
    source = std::make_unique<OracleSource>();
  } else {
    model = restore_model(load_checkpoint(a.checkpoint));
    source = std::make_unique<ModelSource>(*model);
    method = fs::path(a.checkpoint).stem().string();
  }
  const EvalReport rep = evaluate(*source, ds, c.eval, c.seed, g.threads);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_text(dir / "per_sample.csv", per_sample_csv(rep.samples));
  write_text(dir / "summary.csv", summary_csv(method, rep.summary));

  const auto& s = rep.summary;
  out << "split " << split_name(c.eval.split) << ", " << rep.samples.size() << " samples, panel size "
      << (a.oracle ? std::string("= raters") : std::to_string(c.eval.panel_size)) << "\n";
  auto line = [&](const char* region, double ged, std::size_t ng, double dice, std::size_t nd) {
    out << std::left << std::setw(10) << region << std::right << std::setw(10) << fixed(ged) << std::setw(6) << ng
        << std::setw(12) << fixed(dice) << std::setw(6) << nd << "\n";
  };
  out << "region           GED     n   soft Dice     n\n";
  line("ambiguous", s.ged_ambiguous, s.n_ged_ambiguous, s.dice_ambiguous, s.n_dice_ambiguous);
  line("certain", s.ged_certain, s.n_ged_certain, s.dice_certain, s.n_dice_certain);
  out << "wrote " << (dir / "per_sample.csv").string() << " and " << (dir / "summary.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-annotator segmentation with sampled annotator styles", "gds"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "Configuration file ([data]/[model]/[train]/[eval])")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads for evaluation")->check(CLI::Range(1, 256));

  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic multi-rater corpus");
  gen->add_option("--out", gen_out, "Output container path")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a corpus");
  train->add_option("--data", ta.data, "Corpus container")->required()->check(CLI::ExistingFile);
  train->add_option("--out", ta.out_dir, "Output directory for checkpoints and history")->required();
  train->add_option("--ablation", ta.ablation, "full, esg_only or scm_only");
  train->add_option("--from", ta.from, "Resume from a checkpoint")->check(CLI::ExistingFile);
  train->add_option("--epochs", ta.epochs, "Total epochs (overrides the config)")->check(CLI::PositiveNumber);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Decode a panel of hypotheses for one sample");
  sample->add_option("--checkpoint", sa.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  sample->add_option("--data", sa.data, "Corpus container")->required()->check(CLI::ExistingFile);
  sample->add_option("--sample-id", sa.sample_id, "Sample index within the corpus")->required();
  sample->add_option("-m,--panel-size", sa.m, "Number of hypotheses");
  sample->add_option("--out", sa.out_dir, "Output directory")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Region-partitioned evaluation on a split");
  eval->add_option("--checkpoint", ea.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  eval->add_flag("--oracle", ea.oracle, "Use the rater masks as hypotheses");
  eval->add_option("--data", ea.data, "Corpus container")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", ea.out_dir, "Output directory")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (gen->parsed()) return cmd_gen(g, gen_out, out);
    if (train->parsed()) return cmd_train(g, ta, out, err);
    if (sample->parsed()) return cmd_sample(g, sa, out);
    if (eval->parsed()) return cmd_eval(g, ea, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace gds::cli
