#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spixseg/common.hpp"

namespace spixseg {

enum class Modulation { random, hadamard, learned };
enum class HadamardOrdering { natural, sequency };

std::string to_string(Modulation m);
Modulation modulation_from_string(const std::string& s);

/// One modulation mask G_i(x,y) at scene resolution.
struct Pattern {
  Matrix values;
  int index = 0;
};

/// Ordered bank of modulation patterns; the rows of the sensing matrix.
/// Stored flat (one pattern per row) so measurement simulation is a GEMV.
class PatternBank {
public:
  PatternBank(Matrix flat, int height, int width, Modulation strategy, std::uint64_t seed);

  int count() const { return static_cast<int>(flat_.rows()); }
  int height() const { return height_; }
  int width() const { return width_; }
  Modulation strategy() const { return strategy_; }
  std::uint64_t seed() const { return seed_; }

  /// N x (H*W) matrix, row i = pattern i flattened row-major.
  const Matrix& flat() const { return flat_; }

  Pattern pattern(int i) const;

  /// Stable identifier: sha256 of the exact pattern bytes plus dims.
  const std::string& id() const { return id_; }

private:
  Matrix flat_;
  int height_;
  int width_;
  Modulation strategy_;
  std::uint64_t seed_;
  std::string id_;
};

struct NoiseModel {
  enum class Kind { none, additive_gaussian };
  Kind kind = Kind::none;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct MeasurementVector {
  Vector values;
  std::string bank_id;
  std::optional<NoiseModel> noise_meta;
};

/// Number of measurements for a sampling ratio: max(1, floor(ratio * pixels)).
int sampling_count(double ratio, int pixels);

PatternBank make_random_patterns(int count, int height, int width, std::uint64_t seed);

/// Rows of the order-(H*W) Sylvester Hadamard matrix reshaped to H x W,
/// entries in {-1,+1}. Row selection follows `ordering`; the first selected
/// row is always the all-ones (DC) row.
PatternBank make_hadamard_patterns(int count, int height, int width,
                                   HadamardOrdering ordering = HadamardOrdering::sequency);

/// Bank of delta patterns (one pixel per pattern, raster order); the identity
/// sensing matrix used by reconstruction sanity checks.
PatternBank make_identity_patterns(int height, int width);

/// Sylvester Hadamard row: entry j of row r for order n (power of two).
int hadamard_entry(int order, int row, int col);

/// Natural-order row index holding the row of sequency s (s = number of sign
/// changes, so s=0 is the all-ones row).
int hadamard_row_for_sequency(int order, int s);

MeasurementVector apply_noise(const MeasurementVector& clean, const NoiseModel& noise);

/// Eq.-style forward model: values[i] = sum_{x,y} I(x,y) * G_i(x,y), then noise.
MeasurementVector simulate_measurements(const Matrix& scene, const PatternBank& bank,
                                        const NoiseModel& noise = {});

/// Wraps encoder filters (N x H*W, pattern i flattened into row i) as a
/// learned bank. Values are taken exactly as provided.
PatternBank patterns_from_encoder(const Matrix& filters_flat, int height, int width);
PatternBank patterns_from_encoder(const MatrixF& filters_flat, int height, int width);
PatternBank patterns_from_encoder(const Eigen::MatrixXf& filters_flat, int height, int width);

/// Pattern export for DMD playout: one 8-bit PNG per pattern (min-max scaled),
/// a CSV with exact float values, and a JSON manifest describing the bank.
struct ExportedBank {
  std::vector<std::filesystem::path> pngs;
  std::filesystem::path csv;
  std::filesystem::path manifest;
};
ExportedBank export_patterns(const PatternBank& bank, const std::filesystem::path& outdir);

/// Exact round-trip of export_patterns' CSV (+ manifest for metadata).
PatternBank import_patterns_csv(const std::filesystem::path& csv,
                                const std::filesystem::path& manifest);

}  // namespace spixseg
