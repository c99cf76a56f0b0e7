#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spixseg/common.hpp"
#include "spixseg/sensing.hpp"
#include "spixseg/training.hpp"

namespace spixseg {

/// Raw detector recording: one value per projected pattern, in volts.
struct RawRecording {
  std::vector<std::pair<int, double>> rows;  // (pattern_index, value), index-sorted
  std::string device_meta;
  double dark_level = 0.0;

  int count() const { return static_cast<int>(rows.size()); }
};

struct Calibration {
  enum class Normalization { none, zscore_train_stats, max_one };
  double dark_level = 0.0;
  double scale = 1.0;
  Normalization normalization = Normalization::none;

  void validate() const { require(scale > 0, "calibration: scale must be positive"); }
};

Calibration::Normalization normalization_from_string(const std::string& s);
std::string to_string(Calibration::Normalization n);

/// Strict CSV parse (`pattern_index,value` header). Malformed rows raise a
/// DataError naming the line; indices must be unique and contiguous from 0.
RawRecording read_recording(const std::filesystem::path& path);

void write_recording(const RawRecording& rec, const std::filesystem::path& path);

/// Calibration file: JSON {dark_level, scale, normalization}.
Calibration read_calibration(const std::filesystem::path& path);
void write_calibration(const Calibration& cal, const std::filesystem::path& path);

/// volts -> measurement domain: (v - dark) * scale, then the selected
/// normalization. zscore_train_stats standardizes per measurement index with
/// statistics persisted at training time.
MeasurementVector calibrate(const RawRecording& raw, const Calibration& cal, int expected_count,
                            const std::optional<MeasurementStats>& train_stats = std::nullopt,
                            const std::string& bank_id = "");

}  // namespace spixseg
