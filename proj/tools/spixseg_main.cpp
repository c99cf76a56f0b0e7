// Command line front end: data preparation, two-stage training, sweeps,
// reconstruction baselines, pattern export, and measurement-file inference.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include "spixseg/experiment.hpp"
#include "spixseg/measurement_io.hpp"

namespace fs = std::filesystem;
using namespace spixseg;

namespace {

struct RunLog {
  fs::path dir;
  std::ofstream file;

  void line(const std::string& s) {
    std::cout << s << "\n";
    if (file.is_open()) file << s << "\n";
  }
};

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
  return buf;
}

RunLog make_run_dir(const ExperimentConfig& cfg, const std::string& out_base,
                    const std::string& command) {
  RunLog log;
  const std::string digest = cell_digest(cfg).substr(0, 8);
  log.dir = fs::path(out_base) / (command + "-" + digest + "-" + timestamp());
  fs::create_directories(log.dir);
  std::ofstream cfg_out(log.dir / "resolved_config.json");
  cfg_out << config_to_json(cfg).dump(2) << "\n";
  log.file.open(log.dir / "log.txt");
  return log;
}

struct CommonOpts {
  std::string config_path;
  std::string out_base = "runs";
  std::string cache_dir;
  std::string name;
  double ratio = -1.0;
  std::string modulation;
  std::string training;
  long long seed = -1;
  double subset = -1.0;
  int stage1_epochs = -1;
  int stage2_epochs = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config");
    cmd->add_option("--out", out_base, "base directory for run outputs");
    cmd->add_option("--cache-dir", cache_dir, "cache directory (or $SPIXSEG_CACHE_DIR)");
    cmd->add_option("--name", name, "experiment name");
    cmd->add_option("--ratio", ratio, "sampling ratio in (0,1]");
    cmd->add_option("--modulation", modulation, "optimized|random|hadamard");
    cmd->add_option("--training", training, "two_stage|one_stage");
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--subset", subset, "dataset subset fraction, e.g. 0.25");
    cmd->add_option("--stage1-epochs", stage1_epochs, "stage-1 epoch override");
    cmd->add_option("--stage2-epochs", stage2_epochs, "stage-2 epoch override");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    if (!name.empty()) cfg.name = name;
    if (ratio > 0) cfg.sampling_ratio = ratio;
    if (!modulation.empty()) cfg.modulation = modulation;
    if (!training.empty()) cfg.training = training;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (subset > 0) cfg.data.subset_fraction = subset;
    if (stage1_epochs > 0) cfg.train.stage1.epochs = stage1_epochs;
    if (stage2_epochs > 0) cfg.train.stage2.epochs = stage2_epochs;
    return cfg;
  }
};

int cmd_prepare_data(const CommonOpts& opts) {
  const ExperimentConfig cfg = opts.resolve();
  RunLog log = make_run_dir(cfg, opts.out_base, "prepare-data");
  bool hit = false;
  const PreparedDataset ds = prepare_data(cfg, &hit);
  write_manifest_json(ds.manifest, log.dir / "manifest.json");
  log.line(std::string("dataset: ") + ds.manifest.name + (hit ? " (cache hit)" : " (prepared)"));
  log.line("counts: raw=" + std::to_string(ds.manifest.raw_count) +
           " augmented=" + std::to_string(ds.manifest.augmented_count) +
           " train=" + std::to_string(ds.manifest.train_count) +
           " test=" + std::to_string(ds.manifest.test_count));
  log.line("manifest: " + (log.dir / "manifest.json").string());
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const ExperimentConfig cfg = opts.resolve();
  RunLog log = make_run_dir(cfg, opts.out_base, "train");
  const TrainedModel trained = run_training(cfg);
  log.line(std::string("training: ") + (trained.from_cache ? "cache hit, no rework" : "completed"));
  const fs::path ckpt = log.dir / "checkpoint.spx";
  fs::copy_file(trained.checkpoint, ckpt, fs::copy_options::overwrite_existing);
  if (fs::exists(trained.report_csv)) {
    fs::copy_file(trained.report_csv, log.dir / "report.csv", fs::copy_options::overwrite_existing);
  }
  log.line("checkpoint: " + ckpt.string());
  log.line("patterns: " + std::to_string(trained.model.config().n_measurements) + " x " +
           std::to_string(trained.model.config().scene_h) + "x" +
           std::to_string(trained.model.config().scene_w) + " (" + trained.meta.modulation + ")");
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& preset, const std::string& matrix_path) {
  const ExperimentConfig base = opts.resolve();
  SweepSpec spec;
  if (!preset.empty()) {
    spec = preset_sweep(preset, base);
  } else if (!matrix_path.empty()) {
    std::ifstream f(matrix_path);
    if (!f.good()) throw ConfigError("cannot open sweep matrix: " + matrix_path);
    nlohmann::json j = nlohmann::json::parse(f);
    spec = sweep_from_json(j);
    if (!opts.config_path.empty() || j.value("base", nlohmann::json::object()).empty()) {
      spec.base = base;
    }
  } else {
    throw ConfigError("sweep requires --preset or --matrix");
  }
  if (spec.cells.empty()) throw ConfigError("sweep has no cells");

  RunLog log = make_run_dir(base, opts.out_base, "sweep");
  log.line("cells: " + std::to_string(spec.cells.size()));
  const SweepResult result = run_sweep(spec);
  write_rows_csv(result.rows, log.dir / "results.csv");
  for (const char* field : {"modulation", "training", "method"}) {
    std::ofstream txt(log.dir / (std::string("table_by_") + field + ".txt"));
    txt << render_table(result.rows, field, false);
    std::ofstream md(log.dir / (std::string("table_by_") + field + ".md"));
    md << render_table(result.rows, field, true);
  }
  log.line(render_table(result.rows, preset == "table2" ? "modulation" : "training", false));
  log.line("results: " + (log.dir / "results.csv").string());
  if (!result.failures.empty()) {
    std::ofstream f(log.dir / "failures.txt");
    for (const auto& fail : result.failures) {
      f << fail << "\n";
      log.line("FAILED cell: " + fail);
    }
    return 4;
  }
  return 0;
}

int cmd_export_patterns(const CommonOpts& opts, const std::string& checkpoint) {
  const ExperimentConfig cfg = opts.resolve();
  RunLog log = make_run_dir(cfg, opts.out_base, "export-patterns");
  fs::path ckpt = checkpoint;
  if (ckpt.empty()) ckpt = run_training(cfg).checkpoint;  // cached when trained before
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  const auto& net = loaded.model.config();
  const PatternBank bank =
      patterns_from_encoder(loaded.model.encoder_filters(), net.scene_h, net.scene_w);
  const ExportedBank exported = export_patterns(bank, log.dir / "patterns");
  log.line("patterns: " + std::to_string(exported.pngs.size()) + " png + csv + manifest");
  log.line("manifest: " + exported.manifest.string());
  return 0;
}

int cmd_infer(const CommonOpts& opts, const std::string& checkpoint,
              const std::string& measurement_file, const std::string& calibration_file) {
  const ExperimentConfig cfg = opts.resolve();
  RunLog log = make_run_dir(cfg, opts.out_base, "infer");
  fs::path ckpt = checkpoint;
  if (ckpt.empty()) ckpt = run_training(cfg).checkpoint;
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  const auto& net = loaded.model.config();

  const RawRecording rec = read_recording(measurement_file);
  Calibration cal;
  if (!calibration_file.empty()) cal = read_calibration(calibration_file);
  if (rec.count() != net.n_measurements) {
    throw ShapeError("recording has " + std::to_string(rec.count()) + " values, checkpoint expects " +
                     std::to_string(net.n_measurements));
  }
  const MeasurementVector m =
      calibrate(rec, cal, net.n_measurements, loaded.meta.meas_stats);

  nn::Workspace<float> ws;
  nn::Mat<float> meas = m.values.cast<float>();
  const LabelMap labels = loaded.model.infer_from_measurements(meas, ws);
  const fs::path png = log.dir / "segmentation.png";
  write_label_png(labels, net.n_classes, png);
  log.line("labels: " + png.string());
  return 0;
}

int cmd_baseline(const CommonOpts& opts, const std::string& method, const std::string& bank) {
  ExperimentConfig cfg = opts.resolve();
  cfg.method = method;
  if (!bank.empty()) cfg.baseline_bank = bank;
  if (cfg.method != "tvrec" && cfg.method != "dlrec") {
    throw ConfigError("baseline --method must be tvrec or dlrec");
  }
  RunLog log = make_run_dir(cfg, opts.out_base, "baseline");
  const MetricRow row = run_cell(cfg);
  append_rows_csv({row}, log.dir / "results.csv");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s @ ratio %g (%s bank): PA %.2f DICE %.2f", row.method.c_str(),
                row.sampling_ratio, row.modulation.c_str(), row.pa, row.dice);
  log.line(buf);
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint) {
  const ExperimentConfig cfg = opts.resolve();
  RunLog log = make_run_dir(cfg, opts.out_base, "eval");
  const PreparedDataset data = prepare_data(cfg);

  MetricRow row;
  if (!checkpoint.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(checkpoint);
    row = evaluate_model(loaded.model, data.test, cfg.noise);
    row.method = "imagefree";
    row.modulation = loaded.meta.modulation;
    row.training = "n/a";
    row.sampling_ratio =
        static_cast<double>(loaded.model.config().n_measurements) / loaded.model.config().pixels();
    row.seed = cfg.seed;
  } else {
    row = run_cell(cfg);
  }
  append_rows_csv({row}, log.dir / "results.csv");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "PA %.2f DICE %.2f over %d test images", row.pa, row.dice,
                row.n_samples);
  log.line(buf);
  return 0;
}

int cmd_synth_data(const std::string& kind, const std::string& out, int count, long long seed) {
  if (out.empty()) throw ConfigError("synth-data requires --out");
  const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : 123;
  if (kind == "wbc") {
    synth_wbc(out, count > 0 ? count : 300, s);
  } else if (kind == "natural") {
    synth_natural(out, count > 0 ? count : 1200, s);
  } else if (kind == "uas") {
    synth_uas(out, count > 0 ? count : 240, std::max(1, (count > 0 ? count : 240) / 4), s);
  } else {
    throw ConfigError("synth-data --kind must be wbc, natural or uas");
  }
  std::cout << "wrote " << kind << " corpus to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-free single-pixel segmentation toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* prepare = app.add_subcommand("prepare-data", "ingest, augment and split a dataset");
  opts.attach(prepare);

  auto* train = app.add_subcommand("train", "two-stage (or one-stage) training");
  opts.attach(train);
  bool one_stage = false;
  train->add_flag("--one-stage", one_stage, "skip stage 1 (ablation baseline)");

  auto* sweep = app.add_subcommand("sweep", "run a grid of experiment cells");
  opts.attach(sweep);
  std::string preset, matrix;
  sweep->add_option("--preset", preset, "table1 | table2 | fig4");
  sweep->add_option("--matrix", matrix, "JSON sweep matrix file");

  auto* exportp = app.add_subcommand("export-patterns", "write PNG+CSV pattern bank");
  opts.attach(exportp);
  std::string ckpt_path;
  exportp->add_option("--checkpoint", ckpt_path, "checkpoint to export from");

  auto* infer = app.add_subcommand("infer", "segment a measurement recording");
  opts.attach(infer);
  std::string infer_ckpt, meas_file, cal_file;
  infer->add_option("--checkpoint", infer_ckpt, "trained checkpoint");
  infer->add_option("--measurements", meas_file, "recording csv (pattern_index,value)")
      ->required();
  infer->add_option("--calibration", cal_file, "calibration json");

  auto* baseline = app.add_subcommand("baseline", "first-reconstruction-then-segmentation");
  opts.attach(baseline);
  std::string method, bank;
  baseline->add_option("--method", method, "tvrec | dlrec")->required();
  baseline->add_option("--bank", bank, "hadamard | random | identity");

  auto* eval = app.add_subcommand("eval", "evaluate a configuration or checkpoint");
  opts.attach(eval);
  std::string eval_ckpt;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate");

  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
  std::string synth_kind, synth_out;
  int synth_count = 0;
  long long synth_seed = -1;
  synth->add_option("--kind", synth_kind, "wbc | natural | uas")->required();
  synth->add_option("--out", synth_out, "output root")->required();
  synth->add_option("--count", synth_count, "image count");
  synth->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (train->parsed() && one_stage) opts.training = "one_stage";
    if (prepare->parsed()) return cmd_prepare_data(opts);
    if (train->parsed()) return cmd_train(opts);
    if (sweep->parsed()) return cmd_sweep(opts, preset, matrix);
    if (exportp->parsed()) return cmd_export_patterns(opts, ckpt_path);
    if (infer->parsed()) return cmd_infer(opts, infer_ckpt, meas_file, cal_file);
    if (baseline->parsed()) return cmd_baseline(opts, method, bank);
    if (eval->parsed()) return cmd_eval(opts, eval_ckpt);
    if (synth->parsed()) return cmd_synth_data(synth_kind, synth_out, synth_count, synth_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
