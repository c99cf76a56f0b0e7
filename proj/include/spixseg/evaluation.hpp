#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spixseg/common.hpp"
#include "spixseg/datasets.hpp"
#include "spixseg/nn/model.hpp"
#include "spixseg/sensing.hpp"

namespace spixseg {

/// Percentage of pixels whose predicted class matches ground truth.
double pixel_accuracy(const LabelMap& pred, const LabelMap& gt);

/// Mean per-class Dice (percent) over `classes`; an empty-vs-empty class
/// counts as 1.0. Foreground classes only by default (callers pass {1,..}).
double dice(const LabelMap& pred, const LabelMap& gt, const std::vector<int>& classes);

/// Foreground class ids {1, ..., C-1}.
std::vector<int> foreground_classes(int n_classes);

struct MetricRow {
  double sampling_ratio = 0.0;
  std::string method;      // imagefree | tvrec | dlrec | oracle
  std::string modulation;  // optimized | random | hadamard | n/a
  std::string training;    // two_stage | one_stage | n/a
  double pa = 0.0;
  double dice = 0.0;
  int n_samples = 0;
  std::uint64_t seed = 0;
};

using Predictor = std::function<LabelMap(const LabeledSample&)>;

/// Macro metrics (per-image, then averaged) of a predictor over a test set.
MetricRow evaluate_predictor(const Predictor& predict, const std::vector<LabeledSample>& test,
                             int n_classes);

/// Image-free path: simulate measurements with the model's own filters
/// (optionally noisy), then decode. Deterministic given inputs.
MetricRow evaluate_model(const nn::SegNet<float>& model, const std::vector<LabeledSample>& test,
                         const NoiseModel& noise = {});

void write_rows_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);
void append_rows_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path);
std::vector<MetricRow> read_rows_csv(const std::filesystem::path& path);

/// Plain-text and Markdown pivots in the paper's table layout (rows =
/// sampling ratio x metric, columns = the given field's values).
std::string render_table(const std::vector<MetricRow>& rows, const std::string& column_field,
                         bool markdown);

/// Label map palette: class c -> gray round(255*c/(C-1)); lossless decode.
std::uint8_t class_to_gray(int c, int n_classes);
int gray_to_class(std::uint8_t v, int n_classes);

struct PanelItem {
  MatrixF scene;
  std::vector<std::pair<std::string, LabelMap>> maps;  // (column label, labels)
};

/// PNG grid: one row per item, columns = scene then each labeled map.
/// Returns false (with no file) for an empty item list.
bool emit_panels(const std::vector<PanelItem>& items, const std::filesystem::path& path,
                 int n_classes, int cell_scale = 2);

void write_label_png(const LabelMap& labels, int n_classes, const std::filesystem::path& path);
LabelMap read_label_png(const std::filesystem::path& path, int n_classes);

}  // namespace spixseg
