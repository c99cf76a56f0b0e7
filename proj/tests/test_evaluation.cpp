#include <doctest.h>

#include <filesystem>

#include "spixseg/evaluation.hpp"
#include "spixseg/rng.hpp"
#include "spixseg/training.hpp"

using namespace spixseg;
namespace fs = std::filesystem;

namespace {

LabelMap map_of(std::initializer_list<int> vals, int rows, int cols) {
  LabelMap m(rows, cols);
  int i = 0;
  for (int v : vals) m.data()[i++] = static_cast<std::uint8_t>(v);
  return m;
}

}  // namespace

TEST_CASE("pixel accuracy: identity is 100, half-wrong 2x2 map is 50") {
  const LabelMap a = map_of({0, 1, 2, 0}, 2, 2);
  CHECK(pixel_accuracy(a, a) == 100.0);
  const LabelMap b = map_of({0, 1, 0, 1}, 2, 2);  // differs in two pixels
  CHECK(pixel_accuracy(b, a) == 50.0);
  CHECK_THROWS_AS(pixel_accuracy(a, map_of({0, 1}, 1, 2)), ShapeError);
}

TEST_CASE("dice: hand-constructed overlap gives 2*1/(2+2) = 50 for that class") {
  // pred class-1 = {2 px}, gt class-1 = {2 px}, overlap exactly 1 pixel.
  const LabelMap pred = map_of({1, 1, 0, 0}, 2, 2);
  const LabelMap gt = map_of({1, 0, 1, 0}, 2, 2);
  CHECK(dice(pred, gt, {1}) == 50.0);
  CHECK(dice(pred, pred, {1}) == 100.0);
}

TEST_CASE("dice is symmetric and honors the empty-vs-empty convention") {
  Rng rng(3);
  LabelMap a(8, 8), b(8, 8);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = static_cast<std::uint8_t>(rng.below(3));
    b.data()[i] = static_cast<std::uint8_t>(rng.below(3));
  }
  CHECK(dice(a, b, {1, 2}) == dice(b, a, {1, 2}));

  const LabelMap zeros = map_of({0, 0, 0, 0}, 2, 2);
  CHECK(dice(zeros, zeros, {1, 2}) == 100.0);  // both classes empty
  CHECK(dice(zeros, zeros, {1}) == 100.0);
}

TEST_CASE("foreground classes skip the background id") {
  CHECK(foreground_classes(3) == std::vector<int>{1, 2});
  CHECK(foreground_classes(2) == std::vector<int>{1});
}

TEST_CASE("evaluate_predictor: perfect oracle scores 100/100") {
  std::vector<LabeledSample> test(4);
  Rng rng(5);
  for (auto& s : test) {
    s.scene = MatrixF::Zero(8, 8);
    s.labels = LabelMap(8, 8);
    for (Eigen::Index i = 0; i < s.labels.size(); ++i) {
      s.labels.data()[i] = static_cast<std::uint8_t>(rng.below(3));
    }
  }
  const MetricRow row = evaluate_predictor([](const LabeledSample& s) { return s.labels; }, test, 3);
  CHECK(row.pa == 100.0);
  CHECK(row.dice == 100.0);
  CHECK(row.n_samples == 4);
}

TEST_CASE("constant-background predictor scores the background pixel fraction") {
  std::vector<LabeledSample> test(1);
  test[0].scene = MatrixF::Zero(4, 4);
  test[0].labels = LabelMap::Zero(4, 4);
  test[0].labels(0, 0) = 1;
  test[0].labels(0, 1) = 2;
  test[0].labels(0, 2) = 2;  // 13/16 background

  const MetricRow row = evaluate_predictor(
      [](const LabeledSample& s) { return LabelMap(LabelMap::Zero(s.labels.rows(), s.labels.cols())); },
      test, 3);
  CHECK(row.pa == doctest::Approx(100.0 * 13.0 / 16.0));
}

TEST_CASE("evaluation is permutation-invariant over the test set") {
  Rng rng(7);
  std::vector<LabeledSample> test(6);
  for (auto& s : test) {
    s.scene = MatrixF::Zero(8, 8);
    s.labels = LabelMap(8, 8);
    for (Eigen::Index i = 0; i < s.labels.size(); ++i) {
      s.labels.data()[i] = static_cast<std::uint8_t>(rng.below(3));
    }
  }
  auto noisy_orakel = [](const LabeledSample& s) {
    LabelMap m = s.labels;
    m(0, 0) = static_cast<std::uint8_t>((m(0, 0) + 1) % 3);
    return m;
  };
  const MetricRow r1 = evaluate_predictor(noisy_orakel, test, 3);
  std::reverse(test.begin(), test.end());
  const MetricRow r2 = evaluate_predictor(noisy_orakel, test, 3);
  CHECK(r1.pa == doctest::Approx(r2.pa).epsilon(1e-12));
  CHECK(r1.dice == doctest::Approx(r2.dice).epsilon(1e-12));
}

TEST_CASE("results csv round-trips and renders as tables") {
  std::vector<MetricRow> rows;
  for (double ratio : {0.1, 0.01}) {
    for (const char* mod : {"random", "hadamard", "optimized"}) {
      MetricRow r;
      r.sampling_ratio = ratio;
      r.method = "imagefree";
      r.modulation = mod;
      r.training = "two_stage";
      r.pa = 90.0 + ratio;
      r.dice = 75.0;
      r.n_samples = 10;
      r.seed = 3;
      rows.push_back(r);
    }
  }
  const fs::path path = fs::temp_directory_path() / "spixseg_rows.csv";
  write_rows_csv(rows, path);
  const auto back = read_rows_csv(path);
  REQUIRE(back.size() == rows.size());
  CHECK(back[2].modulation == "optimized");
  CHECK(back[3].sampling_ratio == 0.01);
  CHECK(back[0].pa == doctest::Approx(90.1));

  const std::string txt = render_table(rows, "modulation", false);
  CHECK(txt.find("hadamard") != std::string::npos);
  CHECK(txt.find("PA") != std::string::npos);
  CHECK(txt.find("DICE") != std::string::npos);
  const std::string md = render_table(rows, "modulation", true);
  CHECK(md.find("|---") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("class palette round-trips losslessly") {
  for (int n_classes : {2, 3, 4}) {
    for (int c = 0; c < n_classes; ++c) {
      CHECK(gray_to_class(class_to_gray(c, n_classes), n_classes) == c);
    }
  }
  // WBC coding: background black, cytoplasm gray, nucleus white.
  CHECK(class_to_gray(0, 3) == 0);
  CHECK(class_to_gray(1, 3) == 128);
  CHECK(class_to_gray(2, 3) == 255);
}

TEST_CASE("label png round-trip through the palette") {
  Rng rng(9);
  LabelMap m(16, 16);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(rng.below(3));
  const fs::path path = fs::temp_directory_path() / "spixseg_labels.png";
  write_label_png(m, 3, path);
  CHECK(read_label_png(path, 3) == m);
  fs::remove(path);
}

TEST_CASE("panels: 3 samples with gt + 3 methods give a 5-column grid") {
  std::vector<PanelItem> items(3);
  Rng rng(11);
  for (auto& item : items) {
    item.scene = MatrixF::Zero(32, 32);
    LabelMap m(32, 32);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<std::uint8_t>(rng.below(3));
    item.maps = {{"gt", m}, {"imagefree", m}, {"tvrec", m}, {"dlrec", m}};
  }
  const fs::path path = fs::temp_directory_path() / "spixseg_panel.png";
  CHECK(emit_panels(items, path, 3, 2));
  REQUIRE(fs::exists(path));
  const LabelMap grid = read_label_png(path, 256);  // raw gray read
  // 5 columns of 64px cells + 4 spacer columns of 2px.
  CHECK(grid.cols() == 5 * 64 + 4 * 2);
  fs::remove(path);

  CHECK_FALSE(emit_panels({}, path, 3));
  CHECK_FALSE(fs::exists(path));
}
