#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spixseg/measurement_io.hpp"
#include "spixseg/rng.hpp"
#include "spixseg/sensing.hpp"

using namespace spixseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  const fs::path p = fs::temp_directory_path() / "spixseg_io_tests" / name;
  fs::create_directories(p.parent_path());
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

}  // namespace

TEST_CASE("recordings round-trip bit-exactly and sort by index") {
  RawRecording rec;
  Rng rng(3);
  for (int i = 39; i >= 0; --i) rec.rows.emplace_back(i, rng.normal() * 1e-3);
  const fs::path p = temp_file("roundtrip.csv");
  write_recording(rec, p);

  const RawRecording back = read_recording(p);
  CHECK(back.count() == 40);
  for (int i = 0; i < 40; ++i) {
    CHECK(back.rows[static_cast<std::size_t>(i)].first == i);
  }
  // Same values, now sorted.
  for (const auto& [idx, v] : rec.rows) {
    CHECK(back.rows[static_cast<std::size_t>(idx)].second == v);
  }

  const fs::path p2 = temp_file("roundtrip2.csv");
  write_recording(back, p2);
  std::ifstream a(p2), b(p2);
  const RawRecording back2 = read_recording(p2);
  for (int i = 0; i < 40; ++i) {
    CHECK(back2.rows[static_cast<std::size_t>(i)].second ==
          back.rows[static_cast<std::size_t>(i)].second);
  }
}

TEST_CASE("recording parser reports precise failures") {
  const fs::path p = temp_file("bad.csv");

  write_text(p, "wrong,header\n0,1.0\n");
  CHECK_THROWS_WITH_AS(read_recording(p), doctest::Contains("header"), DataError);

  write_text(p, "pattern_index,value\n0,1.0\n1,oops\n");
  CHECK_THROWS_WITH_AS(read_recording(p), doctest::Contains("line 3"), DataError);

  write_text(p, "pattern_index,value\n0,1.0\n7,2.0\n7,3.0\n");
  CHECK_THROWS_WITH_AS(read_recording(p), doctest::Contains("duplicate pattern_index 7"),
                       DataError);

  write_text(p, "pattern_index,value\n0,1.0\n2,2.0\n");
  CHECK_THROWS_WITH_AS(read_recording(p), doctest::Contains("contiguous"), DataError);

  write_text(p, "pattern_index,value\n");
  CHECK_THROWS_AS(read_recording(p), DataError);
}

TEST_CASE("calibration: dark subtraction, scaling, and normalizations") {
  RawRecording rec;
  rec.rows = {{0, 2.0}, {1, 3.0}, {2, 4.0}};

  Calibration cal;
  cal.dark_level = 2.0;
  cal.scale = 1.0;
  const MeasurementVector dark = calibrate(rec, cal, 3);
  CHECK(dark.values[0] == 0.0);
  CHECK(dark.values[2] == 2.0);

  cal.scale = 2.0;
  const MeasurementVector scaled = calibrate(rec, cal, 3);
  CHECK(scaled.values == (2.0 * dark.values).eval());

  cal.normalization = Calibration::Normalization::max_one;
  const MeasurementVector unit = calibrate(rec, cal, 3);
  CHECK(unit.values.cwiseAbs().maxCoeff() == doctest::Approx(1.0));

  cal.normalization = Calibration::Normalization::zscore_train_stats;
  CHECK_THROWS_AS(calibrate(rec, cal, 3), ConfigError);
  MeasurementStats stats;
  stats.mean = Vector::Zero(3);
  stats.stddev = Vector::Constant(3, 2.0);
  const MeasurementVector z = calibrate(rec, cal, 3, stats);
  CHECK(z.values[1] == doctest::Approx((3.0 - 2.0) * 2.0 / 2.0));

  CHECK_THROWS_AS(calibrate(rec, cal, 40), ShapeError);
}

TEST_CASE("calibrate is affine-equivariant") {
  Rng rng(9);
  RawRecording rec;
  for (int i = 0; i < 16; ++i) rec.rows.emplace_back(i, rng.normal());

  Calibration base;
  base.dark_level = 0.1;
  base.scale = 3.0;
  const MeasurementVector ref = calibrate(rec, base, 16);

  // Distort v' = a*v + b and compensate inside the calibration.
  const double a = 2.5, b = -0.7;
  RawRecording distorted = rec;
  for (auto& [idx, v] : distorted.rows) v = a * v + b;
  Calibration comp;
  comp.dark_level = a * base.dark_level + b;
  comp.scale = base.scale / a;
  const MeasurementVector got = calibrate(distorted, comp, 16);
  CHECK((got.values - ref.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("synthetic recording with inverse-affine calibration matches simulation") {
  const PatternBank bank = make_hadamard_patterns(16, 8, 8);
  Rng rng(5);
  Matrix scene(8, 8);
  for (Eigen::Index i = 0; i < scene.size(); ++i) scene.data()[i] = rng.uniform();
  const MeasurementVector sim = simulate_measurements(scene, bank);

  // Pretend the detector applied volts = gain*S + offset.
  const double gain = 0.37, offset = 1.9;
  RawRecording rec;
  for (int i = 0; i < 16; ++i) rec.rows.emplace_back(i, gain * sim.values[i] + offset);
  const fs::path p = temp_file("synthetic.csv");
  write_recording(rec, p);

  Calibration cal;
  cal.dark_level = offset;
  cal.scale = 1.0 / gain;
  const fs::path cp = temp_file("cal.json");
  write_calibration(cal, cp);
  const Calibration cal_back = read_calibration(cp);
  CHECK(cal_back.scale == doctest::Approx(cal.scale));

  const MeasurementVector recovered = calibrate(read_recording(p), cal_back, bank.count());
  CHECK((recovered.values - sim.values).cwiseAbs().maxCoeff() <
        1e-6 * sim.values.cwiseAbs().maxCoeff());
}
