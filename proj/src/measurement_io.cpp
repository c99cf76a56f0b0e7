#include "spixseg/measurement_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace spixseg {

using nlohmann::json;

Calibration::Normalization normalization_from_string(const std::string& s) {
  if (s == "none") return Calibration::Normalization::none;
  if (s == "zscore_train_stats") return Calibration::Normalization::zscore_train_stats;
  if (s == "max_one") return Calibration::Normalization::max_one;
  throw ConfigError("unknown normalization: " + s);
}

std::string to_string(Calibration::Normalization n) {
  switch (n) {
    case Calibration::Normalization::none: return "none";
    case Calibration::Normalization::zscore_train_stats: return "zscore_train_stats";
    case Calibration::Normalization::max_one: return "max_one";
  }
  return "?";
}

RawRecording read_recording(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f.good()) throw DataError("cannot open recording: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "pattern_index,value") {
    throw DataError("recording csv: missing `pattern_index,value` header in " + path.string());
  }
  RawRecording rec;
  std::set<int> seen;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    int idx = 0;
    double value = 0.0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%d,%lg%c", &idx, &value, &extra) < 2 ||
        !std::isfinite(value)) {
      throw DataError("recording csv: malformed row at line " + std::to_string(line_no) + ": " +
                      line);
    }
    if (!seen.insert(idx).second) {
      throw DataError("recording csv: duplicate pattern_index " + std::to_string(idx) +
                      " at line " + std::to_string(line_no));
    }
    rec.rows.emplace_back(idx, value);
  }
  std::sort(rec.rows.begin(), rec.rows.end());
  for (std::size_t i = 0; i < rec.rows.size(); ++i) {
    if (rec.rows[i].first != static_cast<int>(i)) {
      throw DataError("recording csv: pattern indices must be contiguous from 0; missing " +
                      std::to_string(i));
    }
  }
  if (rec.rows.empty()) throw DataError("recording csv: no data rows in " + path.string());
  return rec;
}

void write_recording(const RawRecording& rec, const std::filesystem::path& path) {
  std::ofstream f(path);
  require(f.good(), "cannot write recording " + path.string());
  f << "pattern_index,value\n";
  char buf[64];
  for (const auto& [idx, value] : rec.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", idx, value);
    f << buf;
  }
}

Calibration read_calibration(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f.good()) throw DataError("cannot open calibration: " + path.string());
  json j = json::parse(f);
  Calibration cal;
  cal.dark_level = j.value("dark_level", 0.0);
  cal.scale = j.value("scale", 1.0);
  cal.normalization = normalization_from_string(j.value("normalization", "none"));
  cal.validate();
  return cal;
}

void write_calibration(const Calibration& cal, const std::filesystem::path& path) {
  json j = {{"dark_level", cal.dark_level},
            {"scale", cal.scale},
            {"normalization", to_string(cal.normalization)}};
  std::ofstream f(path);
  require(f.good(), "cannot write calibration " + path.string());
  f << j.dump(2) << "\n";
}

MeasurementVector calibrate(const RawRecording& raw, const Calibration& cal, int expected_count,
                            const std::optional<MeasurementStats>& train_stats,
                            const std::string& bank_id) {
  cal.validate();
  if (raw.count() != expected_count) {
    throw ShapeError("calibrate: recording has " + std::to_string(raw.count()) +
                     " values, pattern bank expects " + std::to_string(expected_count));
  }
  MeasurementVector m;
  m.bank_id = bank_id;
  m.values.resize(raw.count());
  for (int i = 0; i < raw.count(); ++i) {
    m.values[i] = (raw.rows[static_cast<std::size_t>(i)].second - cal.dark_level) * cal.scale;
  }
  switch (cal.normalization) {
    case Calibration::Normalization::none:
      break;
    case Calibration::Normalization::max_one: {
      const double peak = m.values.cwiseAbs().maxCoeff();
      if (peak > 0) m.values /= peak;
      break;
    }
    case Calibration::Normalization::zscore_train_stats: {
      if (!train_stats) {
        throw ConfigError("calibrate: zscore_train_stats requires measurement statistics from a "
                          "training checkpoint");
      }
      require_shape(train_stats->mean.size() == m.values.size(),
                    "calibrate: train stats length mismatch");
      for (Eigen::Index i = 0; i < m.values.size(); ++i) {
        const double sd = train_stats->stddev[i] > 0 ? train_stats->stddev[i] : 1.0;
        m.values[i] = (m.values[i] - train_stats->mean[i]) / sd;
      }
      break;
    }
  }
  return m;
}

}  // namespace spixseg
