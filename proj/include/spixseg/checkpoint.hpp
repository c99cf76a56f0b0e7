#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "spixseg/nn/adam.hpp"
#include "spixseg/nn/model.hpp"
#include "spixseg/training.hpp"

namespace spixseg {

/// Training state recorded alongside the weights.
struct CheckpointMeta {
  int stage = 0;       // 0 = freshly initialized, 1/2 = finished or inside that stage
  int epoch = 0;       // next epoch within `stage` (resume point)
  std::string modulation = "optimized";  // optimized | random | hadamard
  std::uint64_t bank_seed = 0;
  std::optional<MeasurementStats> meas_stats;
};

/// Versioned binary container: JSON header (config + tensor index), raw f32
/// tensors, optional Adam state, trailing SHA-256. Writes are atomic
/// (temp file + rename).
void save_checkpoint(const nn::SegNet<float>& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path, nn::Adam<float>* opt = nullptr);

struct LoadedCheckpoint {
  nn::SegNet<float> model;
  CheckpointMeta meta;
  std::unique_ptr<nn::Adam<float>> opt;  // present when the file carried optimizer state
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Bare tensor container for auxiliary models (same digest/atomicity rules);
/// the store must already have the target layout on load.
void save_param_store(const nn::ParamStore<float>& ps, const std::string& meta_json,
                      const std::filesystem::path& path);
std::string load_param_store(nn::ParamStore<float>& ps, const std::filesystem::path& path);

}  // namespace spixseg
