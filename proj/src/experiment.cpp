#include "spixseg/experiment.hpp"

#include <cstdlib>
#include <fstream>

#include "spixseg/config_json.hpp"
#include "spixseg/digest.hpp"

namespace spixseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json noise_to_json(const NoiseModel& n) {
  return {{"kind", n.kind == NoiseModel::Kind::none ? "none" : "additive_gaussian"},
          {"snr_db", n.snr_db},
          {"seed", n.seed}};
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel n;
  const std::string kind = j.value("kind", "none");
  if (kind == "none") {
    n.kind = NoiseModel::Kind::none;
  } else if (kind == "additive_gaussian") {
    n.kind = NoiseModel::Kind::additive_gaussian;
  } else {
    throw ConfigError("unknown noise kind: " + kind);
  }
  n.snr_db = j.value("snr_db", 0.0);
  n.seed = j.value("seed", std::uint64_t(0));
  return n;
}

json tv_to_json(const TvConfig& c) {
  return {{"lambda", c.lambda},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"kind", c.kind == TvConfig::Kind::anisotropic ? "anisotropic" : "isotropic"},
          {"step", c.step == TvConfig::Step::fixed ? "fixed" : "backtracking"},
          {"inner_iters", c.inner_iters}};
}

TvConfig tv_from_json(const json& j) {
  TvConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.tol = j.value("tol", c.tol);
  const std::string kind = j.value("kind", "anisotropic");
  c.kind = kind == "isotropic" ? TvConfig::Kind::isotropic : TvConfig::Kind::anisotropic;
  const std::string step = j.value("step", "fixed");
  c.step = step == "backtracking" ? TvConfig::Step::backtracking : TvConfig::Step::fixed;
  c.inner_iters = j.value("inner_iters", c.inner_iters);
  return c;
}

json dlrec_to_json(const DlRecConfig& c) {
  return {{"epochs", c.epochs},         {"lr0", c.lr0},
          {"decay", c.decay},           {"decay_every", c.decay_every},
          {"batch_size", c.batch_size}, {"weight_decay", c.weight_decay},
          {"seed", c.seed},             {"refine_channels", c.refine_channels}};
}

DlRecConfig dlrec_from_json(const json& j) {
  DlRecConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr0 = j.value("lr0", c.lr0);
  c.decay = j.value("decay", c.decay);
  c.decay_every = j.value("decay_every", c.decay_every);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.refine_channels = j.value("refine_channels", c.refine_channels);
  return c;
}

json segmenter_to_json(const SegmenterConfig& c) {
  return {{"epochs", c.epochs},         {"lr0", c.lr0},
          {"decay", c.decay},           {"decay_every", c.decay_every},
          {"batch_size", c.batch_size}, {"weight_decay", c.weight_decay},
          {"seed", c.seed},             {"base", c.base}};
}

SegmenterConfig segmenter_from_json(const json& j) {
  SegmenterConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr0 = j.value("lr0", c.lr0);
  c.decay = j.value("decay", c.decay);
  c.decay_every = j.value("decay_every", c.decay_every);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.base = j.value("base", c.base);
  return c;
}

json data_to_json(const DataConfig& d) {
  return {{"kind", d.kind},
          {"root", d.root},
          {"raw_count", d.raw_count},
          {"synth_seed", d.synth_seed},
          {"aug_seed", d.aug_seed},
          {"split_seed", d.split_seed},
          {"subset_fraction", d.subset_fraction},
          {"side", d.side}};
}

DataConfig data_from_json(const json& j) {
  DataConfig d;
  d.kind = j.value("kind", d.kind);
  d.root = j.value("root", d.root);
  d.raw_count = j.value("raw_count", d.raw_count);
  d.synth_seed = j.value("synth_seed", d.synth_seed);
  d.aug_seed = j.value("aug_seed", d.aug_seed);
  d.split_seed = j.value("split_seed", d.split_seed);
  d.subset_fraction = j.value("subset_fraction", d.subset_fraction);
  d.side = j.value("side", d.side);
  return d;
}

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
  return {{"name", cfg.name},
          {"seed", cfg.seed},
          {"data", data_to_json(cfg.data)},
          {"natural", {{"root", cfg.natural.root}, {"count", cfg.natural.count}, {"seed", cfg.natural.seed}}},
          {"sampling_ratio", cfg.sampling_ratio},
          {"modulation", cfg.modulation},
          {"training", cfg.training},
          {"method", cfg.method},
          {"baseline_bank", cfg.baseline_bank},
          {"train", cfg.train},
          {"net", cfg.net},
          {"noise", noise_to_json(cfg.noise)},
          {"tv", tv_to_json(cfg.tv)},
          {"dlrec", dlrec_to_json(cfg.dlrec)},
          {"segmenter", segmenter_to_json(cfg.segmenter)},
          {"cache_dir", cfg.cache_dir}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.name = j.value("name", cfg.name);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("data")) cfg.data = data_from_json(j["data"]);
  if (j.contains("natural")) {
    cfg.natural.root = j["natural"].value("root", cfg.natural.root);
    cfg.natural.count = j["natural"].value("count", cfg.natural.count);
    cfg.natural.seed = j["natural"].value("seed", cfg.natural.seed);
  }
  cfg.sampling_ratio = j.value("sampling_ratio", cfg.sampling_ratio);
  cfg.modulation = j.value("modulation", cfg.modulation);
  cfg.training = j.value("training", cfg.training);
  cfg.method = j.value("method", cfg.method);
  cfg.baseline_bank = j.value("baseline_bank", cfg.baseline_bank);
  if (j.contains("train")) j["train"].get_to(cfg.train);
  if (j.contains("net")) j["net"].get_to(cfg.net);
  if (j.contains("noise")) cfg.noise = noise_from_json(j["noise"]);
  if (j.contains("tv")) cfg.tv = tv_from_json(j["tv"]);
  if (j.contains("dlrec")) cfg.dlrec = dlrec_from_json(j["dlrec"]);
  if (j.contains("segmenter")) cfg.segmenter = segmenter_from_json(j["segmenter"]);
  cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

fs::path resolve_cache_dir(const ExperimentConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("SPIXSEG_CACHE_DIR"); env && *env) return env;
  return ".spixseg_cache";
}

namespace {

json dataset_key(const ExperimentConfig& cfg) {
  json j = data_to_json(cfg.data);
  j["net_side"] = cfg.net.scene_h;
  j["n_classes"] = cfg.net.n_classes;
  return j;
}

json model_key(const ExperimentConfig& cfg) {
  return {{"dataset", dataset_key(cfg)},
          {"natural", {{"root", cfg.natural.root}, {"count", cfg.natural.count}, {"seed", cfg.natural.seed}}},
          {"ratio", cfg.sampling_ratio},
          {"modulation", cfg.modulation},
          {"training", cfg.training},
          {"train", cfg.train},
          {"net", cfg.net},
          {"seed", cfg.seed}};
}

json cell_key(const ExperimentConfig& cfg) {
  json j = {{"method", cfg.method}, {"noise", noise_to_json(cfg.noise)}};
  if (cfg.method == "imagefree") {
    j["model"] = model_key(cfg);
  } else {
    j["dataset"] = dataset_key(cfg);
    j["ratio"] = cfg.sampling_ratio;
    j["bank"] = cfg.baseline_bank;
    j["segmenter"] = segmenter_to_json(cfg.segmenter);
    if (cfg.method == "tvrec") j["tv"] = tv_to_json(cfg.tv);
    if (cfg.method == "dlrec") j["dlrec"] = dlrec_to_json(cfg.dlrec);
    j["seed"] = cfg.seed;
  }
  return j;
}

std::string digest_of(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

}  // namespace

std::string dataset_digest(const ExperimentConfig& cfg) { return digest_of(dataset_key(cfg)); }
std::string model_digest(const ExperimentConfig& cfg) { return digest_of(model_key(cfg)); }
std::string cell_digest(const ExperimentConfig& cfg) { return digest_of(cell_key(cfg)); }

PreparedDataset prepare_data(const ExperimentConfig& cfg, bool* cache_hit) {
  const fs::path cache = resolve_cache_dir(cfg);
  const fs::path container = cache / "datasets" / (dataset_digest(cfg) + ".spxd");
  if (fs::exists(container)) {
    if (cache_hit) *cache_hit = true;
    return load_prepared(container);
  }
  if (cache_hit) *cache_hit = false;
  fs::create_directories(container.parent_path());

  PreparedDataset ds;
  if (cfg.data.kind == "wbc" || cfg.data.kind == "wbc_synth") {
    fs::path root = cfg.data.root;
    if (cfg.data.kind == "wbc_synth") {
      if (root.empty()) {
        root = cache / "synth" / ("wbc-" + std::to_string(cfg.data.synth_seed) + "-" +
                                  std::to_string(cfg.data.raw_count));
      }
      if (!fs::exists(root / "images")) {
        synth_wbc(root, cfg.data.raw_count, cfg.data.synth_seed);
      }
    }
    if (root.empty()) throw ConfigError("data.root required for kind=wbc");
    auto raw = load_wbc(root, cfg.data.side);
    auto augmented = augment_wbc(raw, cfg.data.aug_seed);
    const int total_full = static_cast<int>(augmented.size());
    int train_count = total_full * 3 / 4;  // the paper's 2700/900 proportion
    if (cfg.data.subset_fraction < 1.0) {
      const int keep = std::max(4, static_cast<int>(std::lround(total_full * cfg.data.subset_fraction)));
      augmented = subsample(augmented, keep, cfg.data.aug_seed);
      train_count = keep * 3 / 4;
    }
    auto [train, test] = split(std::move(augmented), train_count, cfg.data.split_seed);
    ds.manifest.name = cfg.data.kind;
    ds.manifest.class_names = {"background", "cytoplasm", "nucleus"};
    ds.manifest.raw_count = static_cast<int>(raw.size());
    ds.manifest.augmented_count = total_full;
    ds.manifest.train_count = static_cast<int>(train.size());
    ds.manifest.test_count = static_cast<int>(test.size());
    ds.manifest.split_seed = cfg.data.split_seed;
    ds.manifest.provenance =
        cfg.data.kind == "wbc_synth" ? "synthetic stand-in corpus" : root.string();
    ds.train = std::move(train);
    ds.test = std::move(test);
  } else if (cfg.data.kind == "uas" || cfg.data.kind == "uas_synth") {
    fs::path root = cfg.data.root;
    if (cfg.data.kind == "uas_synth") {
      if (root.empty()) root = cache / "synth" / ("uas-" + std::to_string(cfg.data.synth_seed));
      if (!fs::exists(root / "train")) synth_uas(root, 240, 60, cfg.data.synth_seed);
    }
    UasDataset uas = load_uas(root, cfg.data.side);
    ds.manifest.name = cfg.data.kind;
    ds.manifest.class_names = {"impassable", "passable"};
    ds.manifest.raw_count = static_cast<int>(uas.train.size() + uas.test.size());
    ds.manifest.augmented_count = ds.manifest.raw_count;
    ds.manifest.train_count = static_cast<int>(uas.train.size());
    ds.manifest.test_count = static_cast<int>(uas.test.size());
    ds.manifest.split_seed = 0;
    ds.manifest.provenance = root.string();
    ds.train = std::move(uas.train);
    ds.test = std::move(uas.test);
  } else {
    throw ConfigError("unknown dataset kind: " + cfg.data.kind);
  }

  save_prepared(ds, container);
  write_manifest_json(ds.manifest, container.string() + ".manifest.json");
  return ds;
}

std::vector<MatrixF> prepare_natural(const ExperimentConfig& cfg) {
  fs::path root = cfg.natural.root;
  if (root.empty()) {
    root = resolve_cache_dir(cfg) / "synth" /
           ("natural-" + std::to_string(cfg.natural.seed) + "-" + std::to_string(cfg.natural.count));
    bool complete = fs::is_directory(root);
    if (complete) {
      int n = 0;
      for (auto it = fs::directory_iterator(root); it != fs::directory_iterator(); ++it) ++n;
      complete = n >= cfg.natural.count;
    }
    if (!complete) synth_natural(root, cfg.natural.count, cfg.natural.seed);
  }
  return load_natural_pretrain(root, cfg.natural.count, cfg.net.scene_h);
}

TrainedModel run_training(const ExperimentConfig& cfg, bool force) {
  const fs::path dir = resolve_cache_dir(cfg) / "models" / model_digest(cfg);
  const fs::path ckpt = dir / "checkpoint.spx";
  if (!force && fs::exists(ckpt)) {
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    return {std::move(loaded.model), loaded.meta, ckpt, dir / "report.csv", true};
  }
  fs::create_directories(dir);

  nn::NetworkConfig net = cfg.net;
  net.n_measurements = sampling_count(cfg.sampling_ratio, net.scene_h * net.scene_w);

  PreparedDataset data = prepare_data(cfg);
  require(!data.train.empty(), "training requires a non-empty train split");

  nn::SegNet<float> model(net);
  initialize(model, cfg.seed);

  bool train_encoder = true;
  std::uint64_t bank_seed = cfg.seed;
  if (cfg.modulation == "random") {
    PatternBank bank = make_random_patterns(net.n_measurements, net.scene_h, net.scene_w, bank_seed);
    set_encoder_from_bank(model, bank.flat());
    train_encoder = false;
  } else if (cfg.modulation == "hadamard") {
    PatternBank bank = make_hadamard_patterns(net.n_measurements, net.scene_h, net.scene_w);
    set_encoder_from_bank(model, bank.flat());
    train_encoder = false;
  } else if (cfg.modulation != "optimized") {
    throw ConfigError("unknown modulation: " + cfg.modulation);
  }

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;

  TrainReport report;
  if (cfg.training == "two_stage") {
    const auto natural = prepare_natural(cfg);
    report = train_stage1(model, natural, tc, train_encoder);
  } else if (cfg.training == "one_stage") {
    report.stage1_skipped = true;
  } else {
    throw ConfigError("unknown training strategy: " + cfg.training);
  }
  TrainReport r2 = train_stage2(model, data.train, tc, train_encoder);
  report.curve.insert(report.curve.end(), r2.curve.begin(), r2.curve.end());
  report.wall_seconds += r2.wall_seconds;

  CheckpointMeta meta;
  meta.stage = 2;
  meta.epoch = tc.stage2.epochs;
  meta.modulation = cfg.modulation;
  meta.bank_seed = bank_seed;
  meta.meas_stats = measurement_stats(model, data.train);
  save_checkpoint(model, meta, ckpt);
  write_report_csv(report, dir / "report.csv");
  {
    std::ofstream f(dir / "config.json");
    f << config_to_json(cfg).dump(2) << "\n";
  }
  report.checkpoint_path = ckpt.string();
  return {std::move(model), meta, ckpt, dir / "report.csv", false};
}

ImageSegmenter run_segmenter_training(const ExperimentConfig& cfg, bool* cache_hit) {
  json key = {{"dataset", dataset_key(cfg)}, {"segmenter", segmenter_to_json(cfg.segmenter)}};
  const fs::path path =
      resolve_cache_dir(cfg) / "models" / ("segmenter-" + digest_of(key) + ".spxt");
  PreparedDataset data = prepare_data(cfg);
  ImageSegmenter seg(cfg.net.scene_h, cfg.net.n_classes, cfg.segmenter);
  if (fs::exists(path)) {
    load_param_store(seg.param_store(), path);
    if (cache_hit) *cache_hit = true;
    return seg;
  }
  if (cache_hit) *cache_hit = false;
  seg.train(data.train);
  fs::create_directories(path.parent_path());
  save_param_store(seg.param_store(), key.dump(), path);
  return seg;
}

PatternBank baseline_bank(const ExperimentConfig& cfg) {
  const int pixels = cfg.net.scene_h * cfg.net.scene_w;
  const int n = sampling_count(cfg.sampling_ratio, pixels);
  if (cfg.baseline_bank == "hadamard") {
    return make_hadamard_patterns(n, cfg.net.scene_h, cfg.net.scene_w);
  }
  if (cfg.baseline_bank == "random") {
    return make_random_patterns(n, cfg.net.scene_h, cfg.net.scene_w, cfg.seed);
  }
  if (cfg.baseline_bank == "identity") {
    require(n == pixels, "identity baseline bank requires sampling ratio 1.0");
    return make_identity_patterns(cfg.net.scene_h, cfg.net.scene_w);
  }
  throw ConfigError("unknown baseline bank: " + cfg.baseline_bank);
}

DlRec run_dlrec_training(const ExperimentConfig& cfg, const PatternBank& bank, bool* cache_hit) {
  json key = {{"dataset", dataset_key(cfg)},
              {"dlrec", dlrec_to_json(cfg.dlrec)},
              {"bank", cfg.baseline_bank},
              {"ratio", cfg.sampling_ratio}};
  const fs::path path = resolve_cache_dir(cfg) / "models" / ("dlrec-" + digest_of(key) + ".spxt");
  DlRec rec(bank.count(), cfg.net.scene_h, cfg.dlrec);
  if (fs::exists(path)) {
    load_param_store(rec.param_store(), path);
    if (cache_hit) *cache_hit = true;
    return rec;
  }
  if (cache_hit) *cache_hit = false;
  PreparedDataset data = prepare_data(cfg);
  std::vector<MatrixF> scenes;
  scenes.reserve(data.train.size());
  for (const auto& s : data.train) scenes.push_back(s.scene);
  rec.train(scenes, bank);
  fs::create_directories(path.parent_path());
  save_param_store(rec.param_store(), key.dump(), path);
  return rec;
}

MetricRow run_cell(const ExperimentConfig& cfg, bool* cache_hit) {
  const fs::path cell_path =
      resolve_cache_dir(cfg) / "cells" / (cell_digest(cfg) + ".json");
  if (fs::exists(cell_path)) {
    std::ifstream f(cell_path);
    json j = json::parse(f);
    MetricRow row;
    row.sampling_ratio = j.at("sampling_ratio").get<double>();
    row.method = j.at("method").get<std::string>();
    row.modulation = j.at("modulation").get<std::string>();
    row.training = j.at("training").get<std::string>();
    row.pa = j.at("pa").get<double>();
    row.dice = j.at("dice").get<double>();
    row.n_samples = j.at("n_samples").get<int>();
    row.seed = j.at("seed").get<std::uint64_t>();
    if (cache_hit) *cache_hit = true;
    return row;
  }
  if (cache_hit) *cache_hit = false;

  MetricRow row;
  row.sampling_ratio = cfg.sampling_ratio;
  row.seed = cfg.seed;
  PreparedDataset data = prepare_data(cfg);
  if (cfg.method == "imagefree") {
    TrainedModel trained = run_training(cfg);
    MetricRow m = evaluate_model(trained.model, data.test, cfg.noise);
    row.pa = m.pa;
    row.dice = m.dice;
    row.n_samples = m.n_samples;
    row.method = "imagefree";
    row.modulation = cfg.modulation;
    row.training = cfg.training;
  } else {
    const PatternBank bank = baseline_bank(cfg);
    ImageSegmenter seg = run_segmenter_training(cfg);
    MetricRow m;
    if (cfg.method == "tvrec") {
      m = run_baseline_pipeline(data.test, bank, BaselineMethod::tvrec, cfg.tv, nullptr, seg,
                                cfg.noise);
    } else if (cfg.method == "dlrec") {
      DlRec rec = run_dlrec_training(cfg, bank);
      m = run_baseline_pipeline(data.test, bank, BaselineMethod::dlrec, cfg.tv, &rec, seg,
                                cfg.noise);
    } else {
      throw ConfigError("unknown method: " + cfg.method);
    }
    row.pa = m.pa;
    row.dice = m.dice;
    row.n_samples = m.n_samples;
    row.method = cfg.method;
    row.modulation = cfg.baseline_bank;
    row.training = "n/a";
  }

  fs::create_directories(cell_path.parent_path());
  json j = {{"sampling_ratio", row.sampling_ratio},
            {"method", row.method},
            {"modulation", row.modulation},
            {"training", row.training},
            {"pa", row.pa},
            {"dice", row.dice},
            {"n_samples", row.n_samples},
            {"seed", row.seed},
            {"config", cell_key(cfg)}};
  std::ofstream f(cell_path);
  f << j.dump(2) << "\n";
  return row;
}

SweepSpec sweep_from_json(const json& j) {
  SweepSpec spec;
  spec.base = config_from_json(j.value("base", json::object()));
  if (j.contains("cells")) {
    for (const auto& c : j["cells"]) {
      spec.cells.push_back({c.at("ratio").get<double>(),
                            c.value("modulation", spec.base.modulation),
                            c.value("training", spec.base.training),
                            c.value("method", spec.base.method)});
    }
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    const auto ratios = g.value("ratios", std::vector<double>{spec.base.sampling_ratio});
    const auto mods = g.value("modulations", std::vector<std::string>{spec.base.modulation});
    const auto trs = g.value("trainings", std::vector<std::string>{spec.base.training});
    const auto methods = g.value("methods", std::vector<std::string>{spec.base.method});
    for (double r : ratios) {
      for (const auto& me : methods) {
        for (const auto& mo : mods) {
          for (const auto& tr : trs) {
            spec.cells.push_back({r, mo, tr, me});
          }
        }
      }
    }
  }
  return spec;
}

SweepResult run_sweep(const SweepSpec& spec) {
  SweepResult out;
  for (const auto& cell : spec.cells) {
    ExperimentConfig cfg = spec.base;
    cfg.sampling_ratio = cell.ratio;
    cfg.modulation = cell.modulation;
    cfg.training = cell.training;
    cfg.method = cell.method;
    char desc[160];
    std::snprintf(desc, sizeof(desc), "ratio=%g method=%s modulation=%s training=%s", cell.ratio,
                  cell.method.c_str(), cell.modulation.c_str(), cell.training.c_str());
    try {
      out.rows.push_back(run_cell(cfg));
    } catch (const std::exception& e) {
      out.failures.push_back(std::string(desc) + ": " + e.what());
    }
  }
  return out;
}

SweepSpec preset_sweep(const std::string& name, const ExperimentConfig& base) {
  SweepSpec spec;
  spec.base = base;
  if (name == "table1") {
    for (double r : {0.5, 0.05, 0.01, 0.001, 0.0002}) {
      for (const char* tr : {"one_stage", "two_stage"}) {
        spec.cells.push_back({r, "optimized", tr, "imagefree"});
      }
    }
  } else if (name == "table2") {
    for (double r : {0.1, 0.05, 0.01, 0.0002}) {
      for (const char* mo : {"random", "hadamard", "optimized"}) {
        spec.cells.push_back({r, mo, "two_stage", "imagefree"});
      }
    }
  } else if (name == "fig4") {
    for (double r : {0.05, 0.01, 0.001}) {
      spec.cells.push_back({r, "optimized", "two_stage", "imagefree"});
    }
    for (double r : {1.0, 0.2, 0.05, 0.01}) {
      spec.cells.push_back({r, base.baseline_bank, "n/a", "tvrec"});
    }
    for (double r : {0.05, 0.01}) {
      spec.cells.push_back({r, base.baseline_bank, "n/a", "dlrec"});
    }
  } else {
    throw ConfigError("unknown sweep preset: " + name);
  }
  return spec;
}

}  // namespace spixseg
