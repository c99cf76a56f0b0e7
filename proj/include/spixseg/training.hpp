#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spixseg/common.hpp"
#include "spixseg/datasets.hpp"
#include "spixseg/nn/adam.hpp"
#include "spixseg/nn/model.hpp"
#include "spixseg/rng.hpp"

namespace spixseg {

struct StageConfig {
  double lr0 = 1e-3;
  double decay = 0.8;
  int decay_every = 50;  // epochs
  int epochs = 100;
};

struct TrainConfig {
  StageConfig stage1{2e-3, 0.8, 20, 30};
  StageConfig stage2{1e-3, 0.8, 50, 100};
  double weight_decay = 1e-4;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    for (const StageConfig* s : {&stage1, &stage2}) {
      require(s->lr0 > 0, "train config: learning rates must be positive");
      require(s->decay > 0 && s->decay <= 1, "train config: decay must lie in (0,1]");
      require(s->decay_every >= 1 && s->epochs >= 1, "train config: epochs must be >= 1");
    }
    require(batch_size >= 1, "train config: batch size must be >= 1");
  }
};

/// Step-decay schedule: lr0 * decay^floor(epoch / every).
inline double lr_at(int epoch, double lr0, double decay, int every) {
  require(epoch >= 0 && every >= 1, "lr_at: bad arguments");
  return lr0 * std::pow(decay, static_cast<double>(epoch / every));
}

struct EpochRecord {
  int epoch;
  int stage;
  double lr;
  double loss;
};

struct TrainReport {
  std::vector<EpochRecord> curve;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  bool stage1_skipped = false;
};

void write_report_csv(const TrainReport& report, const std::filesystem::path& path);

/// Fan-in variance-scaled Gaussian initialization (biases zero, rectifier
/// slopes 0.25). Deterministic per seed.
template <typename T>
void initialize_params(nn::ParamStore<T>& ps, std::uint64_t seed) {
  auto& entries = ps.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    switch (e.init) {
      case nn::InitKind::zero:
        e.value.setZero();
        break;
      case nn::InitKind::prelu_slope:
        e.value.setConstant(static_cast<T>(0.25));
        break;
      case nn::InitKind::he_normal: {
        Rng rng = Rng::fork(seed, 0x494e4954ULL + i);
        const double std_dev = std::sqrt(2.0 / static_cast<double>(e.fan_in));
        for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
          for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
            e.value(r, c) = static_cast<T>(std_dev * rng.normal());
          }
        }
        break;
      }
    }
  }
}

void initialize(nn::SegNet<float>& model, std::uint64_t seed);

/// Sets the encoder filters to a fixed modulation bank (exact copy).
void set_encoder_from_bank(nn::SegNet<float>& model, const Matrix& bank_flat);

/// Stage 1: self-reconstruction on natural images. Gradient flow is limited
/// to encoder + expand + fsrcnn; the segmentation head is untouched. When
/// `train_encoder` is false (fixed modulation) the encoder is frozen too.
TrainReport train_stage1(nn::SegNet<float>& model, const std::vector<MatrixF>& scenes,
                         const TrainConfig& cfg, bool train_encoder = true, int start_epoch = 0,
                         nn::Adam<float>* resume_opt = nullptr);

/// Stage 2: segmentation against one-hot label maps with MSE. Scope is the
/// whole network, or decoder-only for fixed modulation.
TrainReport train_stage2(nn::SegNet<float>& model, const std::vector<LabeledSample>& samples,
                         const TrainConfig& cfg, bool train_encoder = true, int start_epoch = 0,
                         nn::Adam<float>* resume_opt = nullptr);

/// One-hot targets (n_classes x pixels) for a label map.
nn::Mat<float> one_hot_targets(const LabelMap& labels, int n_classes);

/// Per-measurement-index mean/std of encode() over a training set; persisted
/// in checkpoints for recording calibration.
struct MeasurementStats {
  Vector mean;
  Vector stddev;
};
MeasurementStats measurement_stats(const nn::SegNet<float>& model,
                                   const std::vector<LabeledSample>& samples);

/// SHA-256 over the raw bytes of every tensor in a group (gradient-scope checks).
template <typename T>
std::string group_checksum(const nn::ParamStore<T>& ps, nn::ParamGroup g);

}  // namespace spixseg
