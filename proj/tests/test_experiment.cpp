#include <doctest.h>

#include <chrono>
#include <filesystem>

#include "spixseg/experiment.hpp"

using namespace spixseg;
namespace fs = std::filesystem;

namespace {

ExperimentConfig desk_config() {
  static const fs::path cache = [] {
    const fs::path p = fs::temp_directory_path() / "spixseg_experiment_cache";
    fs::remove_all(p);
    return p;
  }();
  ExperimentConfig cfg;
  cfg.cache_dir = cache.string();
  cfg.data.kind = "wbc_synth";
  cfg.data.synth_seed = 2024;
  cfg.data.subset_fraction = 0.05;  // 180 samples: unit-test scale
  cfg.natural.count = 40;
  cfg.train.stage1.epochs = 1;
  cfg.train.stage2.epochs = 1;
  cfg.sampling_ratio = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("experiment config round-trips through json") {
  ExperimentConfig cfg = desk_config();
  cfg.modulation = "hadamard";
  cfg.tv.lambda = 0.5;
  cfg.noise.kind = NoiseModel::Kind::additive_gaussian;
  cfg.noise.snr_db = 30.0;
  const auto j = config_to_json(cfg);
  const ExperimentConfig back = config_from_json(j);
  CHECK(back.modulation == "hadamard");
  CHECK(back.tv.lambda == 0.5);
  CHECK(back.noise.snr_db == 30.0);
  CHECK(back.data.subset_fraction == cfg.data.subset_fraction);
  CHECK(config_to_json(back) == j);
}

TEST_CASE("digests cover every result-affecting field") {
  const ExperimentConfig base = desk_config();
  CHECK(model_digest(base) == model_digest(base));

  ExperimentConfig seed = base;
  seed.seed = base.seed + 1;
  CHECK(model_digest(seed) != model_digest(base));

  ExperimentConfig ratio = base;
  ratio.sampling_ratio = 0.05;
  CHECK(model_digest(ratio) != model_digest(base));

  ExperimentConfig strategy = base;
  strategy.training = "one_stage";
  CHECK(model_digest(strategy) != model_digest(base));

  ExperimentConfig data = base;
  data.data.split_seed = 1000;
  CHECK(dataset_digest(data) != dataset_digest(base));
  CHECK(model_digest(data) != model_digest(base));

  // TV settings matter for tvrec cells but not image-free ones.
  ExperimentConfig tv_free = base;
  tv_free.tv.lambda *= 2;
  CHECK(cell_digest(tv_free) == cell_digest(base));
  ExperimentConfig tv_cell = base;
  tv_cell.method = "tvrec";
  ExperimentConfig tv_cell2 = tv_cell;
  tv_cell2.tv.lambda *= 2;
  CHECK(cell_digest(tv_cell) != cell_digest(tv_cell2));
}

TEST_CASE("prepare_data: quarter-style subsetting keeps the 3:1 split") {
  ExperimentConfig cfg = desk_config();
  bool hit = true;
  const PreparedDataset full = prepare_data(cfg, &hit);
  CHECK_FALSE(hit);
  CHECK(full.manifest.raw_count == 300);
  CHECK(full.manifest.augmented_count == 3600);
  CHECK(full.train.size() == 135);  // 3600*0.05 = 180 -> 135/45
  CHECK(full.test.size() == 45);

  const PreparedDataset cached = prepare_data(cfg, &hit);
  CHECK(hit);
  CHECK(cached.train.size() == full.train.size());
  CHECK(cached.train[0].scene == full.train[0].scene);
}

TEST_CASE("run_cell trains, caches, and reruns from cache") {
  ExperimentConfig cfg = desk_config();
  cfg.training = "one_stage";  // cheapest cell for the unit scale

  bool hit = true;
  const auto t0 = std::chrono::steady_clock::now();
  const MetricRow row = run_cell(cfg, &hit);
  const double first_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK_FALSE(hit);
  CHECK(row.method == "imagefree");
  CHECK(row.n_samples == 45);
  CHECK(row.pa >= 0.0);
  CHECK(row.pa <= 100.0);

  const auto t1 = std::chrono::steady_clock::now();
  const MetricRow again = run_cell(cfg, &hit);
  const double second_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  CHECK(hit);
  CHECK(again.pa == row.pa);
  CHECK(again.dice == row.dice);
  CHECK(second_s < std::max(0.5, first_s / 4));

  // The trained checkpoint itself is cached too.
  TrainedModel trained = run_training(cfg);
  CHECK(trained.from_cache);
}

TEST_CASE("sweeps record per-cell failures and continue") {
  ExperimentConfig base = desk_config();
  base.training = "one_stage";
  SweepSpec spec;
  spec.base = base;
  spec.cells.push_back({0.01, "optimized", "one_stage", "imagefree"});  // cached from above
  spec.cells.push_back({0.01, "not_a_modulation", "one_stage", "imagefree"});
  const SweepResult result = run_sweep(spec);
  CHECK(result.rows.size() == 1);
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].find("not_a_modulation") != std::string::npos);
}

TEST_CASE("presets mirror the paper's table shapes") {
  const ExperimentConfig base = desk_config();
  CHECK(preset_sweep("table1", base).cells.size() == 10);  // 5 ratios x 2 strategies
  CHECK(preset_sweep("table2", base).cells.size() == 12);  // 4 ratios x 3 modulations
  CHECK(preset_sweep("fig4", base).cells.size() > 0);
  CHECK_THROWS_AS(preset_sweep("nope", base), ConfigError);
}

TEST_CASE("uas_synth adapter flows through prepare_data") {
  ExperimentConfig cfg = desk_config();
  cfg.data.kind = "uas_synth";
  cfg.net.n_classes = 2;
  cfg.net.class_names = {"impassable", "passable"};
  const PreparedDataset ds = prepare_data(cfg);
  CHECK(ds.manifest.train_count == 240);
  CHECK(ds.manifest.test_count == 60);
  CHECK(ds.manifest.class_names[1] == "passable");
}
