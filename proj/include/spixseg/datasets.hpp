#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spixseg/common.hpp"

namespace spixseg {

/// Scene + labels at network resolution. Scenes are grayscale in [0,1].
struct LabeledSample {
  MatrixF scene;
  LabelMap labels;
  std::string source_id;
  std::string augmentation_tag;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> class_names;
  int raw_count = 0;
  int augmented_count = 0;
  int train_count = 0;
  int test_count = 0;
  std::uint64_t split_seed = 0;
  std::string provenance;
};

/// Loads image/label pairs from root/images and root/labels (matching stems).
/// Scenes: grayscale, bilinear resize to `side`, [0,1]. Labels: nearest
/// resize, gray levels {0, mid, max} decoded to class ids {0,1,2}.
std::vector<LabeledSample> load_wbc(const std::filesystem::path& root, int side = 64);

/// Mirror stage (x4: identity, horizontal, vertical, both), then each image
/// yields itself plus one random-affine variant and one 50-degree rotation
/// (x3). 300 raw samples -> 1200 -> 3600.
std::vector<LabeledSample> augment_wbc(const std::vector<LabeledSample>& raw, std::uint64_t seed);

/// The per-variant geometric maps used by augmentation stage B, exposed so
/// tests can assert scene/label transform consistency. Row-major 2x3 affine.
struct AugmentPlan {
  std::array<double, 6> affine;
  std::array<double, 6> rot50;
};
AugmentPlan augment_plan(int mirrored_index, int side, std::uint64_t seed);

/// Deterministic disjoint split; first `train_count` of a seeded shuffle.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    std::vector<LabeledSample> samples, int train_count, std::uint64_t seed);

/// Grayscale 64x64 scenes in [0,1] from any folder of images, lexicographic
/// order, first `limit` files. Color inputs reduce via 0.299/0.587/0.114.
std::vector<MatrixF> load_natural_pretrain(const std::filesystem::path& root, int limit,
                                           int side = 64);

struct UasDataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

/// Optional road-scene adapter: binary labels (passable/impassable),
/// root/{train,test}/{images,labels}. Missing root raises a clean DataError.
UasDataset load_uas(const std::filesystem::path& root, int side = 64);

/// Deterministic subsample (used by the quarter-size desk option).
std::vector<LabeledSample> subsample(const std::vector<LabeledSample>& samples, int count,
                                     std::uint64_t seed);

// --- synthetic desk-scale corpora -----------------------------------------
// Stand-ins for corpora that cannot ship with the repo. Layout matches the
// loaders above exactly.

/// Blood-smear-like images: dark background with red-cell distractors, one
/// gray cytoplasm ellipse, bright lobed nucleus. Labels use {0,128,255}.
void synth_wbc(const std::filesystem::path& root, int count, std::uint64_t seed, int side = 120);

/// Dead-leaves style textures for reconstruction pretraining.
void synth_natural(const std::filesystem::path& root, int count, std::uint64_t seed,
                   int side = 96);

/// Road-like binary-label scenes in the UAS layout.
void synth_uas(const std::filesystem::path& root, int train_count, int test_count,
               std::uint64_t seed, int side = 120);

// --- prepared dataset container --------------------------------------------

struct PreparedDataset {
  DatasetManifest manifest;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

/// Binary container with JSON header, f32 scenes, u8 labels and a trailing
/// SHA-256 integrity digest.
void save_prepared(const PreparedDataset& ds, const std::filesystem::path& path);
PreparedDataset load_prepared(const std::filesystem::path& path);

void write_manifest_json(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace spixseg
