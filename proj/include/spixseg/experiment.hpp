#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spixseg/baselines.hpp"
#include "spixseg/checkpoint.hpp"
#include "spixseg/datasets.hpp"
#include "spixseg/evaluation.hpp"
#include "spixseg/sensing.hpp"
#include "spixseg/training.hpp"

namespace spixseg {

struct DataConfig {
  std::string kind = "wbc_synth";  // wbc | wbc_synth | uas | uas_synth
  std::string root;                // required for non-synthetic kinds
  int raw_count = 300;
  std::uint64_t synth_seed = 123;
  std::uint64_t aug_seed = 77;
  std::uint64_t split_seed = 99;
  double subset_fraction = 1.0;  // deterministic subsample after augmentation
  int side = 64;
};

struct NaturalConfig {
  std::string root;  // empty -> synthetic dead-leaves corpus
  int count = 1200;
  std::uint64_t seed = 5;
};

struct ExperimentConfig {
  std::string name = "default";
  std::uint64_t seed = 1;
  DataConfig data;
  NaturalConfig natural;
  double sampling_ratio = 0.01;
  std::string modulation = "optimized";  // optimized | random | hadamard
  std::string training = "two_stage";    // two_stage | one_stage
  std::string method = "imagefree";      // imagefree | tvrec | dlrec
  std::string baseline_bank = "hadamard";  // hadamard | random | identity
  TrainConfig train;
  nn::NetworkConfig net;
  NoiseModel noise;
  TvConfig tv;
  DlRecConfig dlrec;
  SegmenterConfig segmenter;
  std::string cache_dir;  // empty -> $SPIXSEG_CACHE_DIR or .spixseg_cache
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

std::filesystem::path resolve_cache_dir(const ExperimentConfig& cfg);

/// Digests of the result-affecting parts of a configuration (cache keys).
std::string dataset_digest(const ExperimentConfig& cfg);
std::string model_digest(const ExperimentConfig& cfg);
std::string cell_digest(const ExperimentConfig& cfg);

/// Prepare (or fetch from cache) the segmentation dataset, including synthetic
/// generation for *_synth kinds.
PreparedDataset prepare_data(const ExperimentConfig& cfg, bool* cache_hit = nullptr);

/// Natural-image pretraining corpus (synthetic dead-leaves when no root given).
std::vector<MatrixF> prepare_natural(const ExperimentConfig& cfg);

struct TrainedModel {
  nn::SegNet<float> model;
  CheckpointMeta meta;
  std::filesystem::path checkpoint;
  std::filesystem::path report_csv;
  bool from_cache = false;
};

/// Train the image-free model for this configuration (or load the cached
/// checkpoint with the same digest).
TrainedModel run_training(const ExperimentConfig& cfg, bool force = false);

/// Train-or-load the clean-image segmenter / learned reconstructor for this
/// dataset configuration.
ImageSegmenter run_segmenter_training(const ExperimentConfig& cfg, bool* cache_hit = nullptr);
DlRec run_dlrec_training(const ExperimentConfig& cfg, const PatternBank& bank,
                         bool* cache_hit = nullptr);

/// Pattern bank used by reconstruction baselines at this configuration.
PatternBank baseline_bank(const ExperimentConfig& cfg);

/// Evaluate one sweep cell (trains or loads everything it needs; cached by
/// cell digest).
MetricRow run_cell(const ExperimentConfig& cfg, bool* cache_hit = nullptr);

struct SweepCell {
  double ratio;
  std::string modulation;
  std::string training;
  std::string method;
};

struct SweepSpec {
  ExperimentConfig base;
  std::vector<SweepCell> cells;
};

SweepSpec sweep_from_json(const nlohmann::json& j);

struct SweepResult {
  std::vector<MetricRow> rows;
  std::vector<std::string> failures;  // "cell description: error"
};

/// Runs every cell; per-cell failures are recorded and the sweep continues.
SweepResult run_sweep(const SweepSpec& spec);

/// Built-in presets mirroring the paper's comparison grids.
SweepSpec preset_sweep(const std::string& name, const ExperimentConfig& base);

}  // namespace spixseg
