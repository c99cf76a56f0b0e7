#include <doctest.h>

#include <cmath>

#include "spixseg/baselines.hpp"
#include "spixseg/rng.hpp"

using namespace spixseg;

namespace {

Matrix random_scene(int side, std::uint64_t seed) {
  Rng rng(seed);
  Matrix s(side, side);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform();
  return s;
}

Matrix blob_scene(int side, std::uint64_t seed) {
  Rng rng(seed);
  Matrix s = Matrix::Constant(side, side, 0.1);
  const double cx = rng.uniform(0.3, 0.7) * side;
  const double cy = rng.uniform(0.3, 0.7) * side;
  const double r = rng.uniform(0.15, 0.3) * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (std::hypot(x - cx, y - cy) < r) s(y, x) = 0.85;
    }
  }
  return s;
}

double psnr(const Matrix& a, const Matrix& b) {
  const double mse = (a - b).squaredNorm() / static_cast<double>(a.size());
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_CASE("tv smooth-term gradient matches finite differences on 8x8") {
  const PatternBank bank = make_random_patterns(12, 8, 8, 5);
  const Matrix scene = random_scene(8, 6);
  const MeasurementVector m = simulate_measurements(scene, bank);

  Matrix x = random_scene(8, 7);
  const Matrix g = tv_data_gradient(x, m, bank);

  TvConfig cfg;
  cfg.lambda = 1e-12;  // isolate the smooth term in tv_objective
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    const double up = tv_objective(x, m, bank, cfg);
    x.data()[i] = saved - eps;
    const double down = tv_objective(x, m, bank, cfg);
    x.data()[i] = saved;
    const double fd = (up - down) / (2 * eps);
    CHECK(std::abs(g.data()[i] - fd) <=
          1e-6 * std::max({std::abs(fd), std::abs(g.data()[i]), 1.0}));
  }
}

TEST_CASE("tv objective trace is non-increasing on random instances") {
  for (int t = 0; t < 12; ++t) {
    const PatternBank bank = make_random_patterns(10, 12, 12, 100 + t);
    const Matrix scene = random_scene(12, 200 + t);
    const MeasurementVector m = simulate_measurements(scene, bank);
    TvConfig cfg;
    cfg.max_iters = 60;
    cfg.kind = t % 2 ? TvConfig::Kind::isotropic : TvConfig::Kind::anisotropic;
    cfg.step = t % 3 ? TvConfig::Step::fixed : TvConfig::Step::backtracking;
    const ReconstructedImage rec = tv_reconstruct(m, bank, cfg);
    for (std::size_t k = 1; k < rec.objective_trace.size(); ++k) {
      CHECK(rec.objective_trace[k] <= rec.objective_trace[k - 1] + 1e-12);
    }
    CHECK(rec.pixels.minCoeff() >= 0.0);
    CHECK(rec.pixels.maxCoeff() <= 1.0);
    CHECK(rec.iters_used >= 1);
  }
}

TEST_CASE("identity sampling with tiny lambda recovers the scene above 40 dB") {
  const int side = 16;
  const PatternBank eye = make_identity_patterns(side, side);
  const Matrix scene = blob_scene(side, 3);
  const MeasurementVector m = simulate_measurements(scene, eye);
  TvConfig cfg;
  cfg.lambda = 1e-6;
  cfg.max_iters = 50;
  const ReconstructedImage rec = tv_reconstruct(m, eye, cfg);
  CHECK(psnr(rec.pixels, scene) >= 40.0);
}

TEST_CASE("constant scenes are recovered exactly (objective reaches zero)") {
  const int side = 12;
  const Matrix scene = Matrix::Constant(side, side, 0.4);
  const PatternBank bank = make_random_patterns(20, side, side, 9);
  const MeasurementVector m = simulate_measurements(scene, bank);

  TvConfig cfg;
  cfg.lambda = 1e-2;
  cfg.max_iters = 400;
  cfg.tol = 1e-12;
  // The true solution has zero objective: zero residual and zero TV.
  CHECK(tv_objective(scene, m, bank, cfg) == doctest::Approx(0.0).epsilon(1e-12));

  const ReconstructedImage rec = tv_reconstruct(m, bank, cfg);
  CHECK(rec.objective_trace.back() < 1e-6 * rec.objective_trace.front());
  CHECK((rec.pixels - scene).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("tv solver dimension mismatch raises a shape error") {
  const PatternBank bank = make_random_patterns(4, 8, 8, 1);
  MeasurementVector m;
  m.values = Vector::Zero(7);
  CHECK_THROWS_AS(tv_reconstruct(m, bank, TvConfig{}), ShapeError);
}

TEST_CASE("tv reconstruction is deterministic") {
  const PatternBank bank = make_random_patterns(8, 8, 8, 2);
  const MeasurementVector m = simulate_measurements(random_scene(8, 3), bank);
  const ReconstructedImage a = tv_reconstruct(m, bank, TvConfig{});
  const ReconstructedImage b = tv_reconstruct(m, bank, TvConfig{});
  CHECK(a.pixels == b.pixels);
  CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("dlrec learns, stays in range, and beats tv at ratio 0.01") {
  const int side = 64;
  const int n_meas = 40;
  std::vector<MatrixF> train;
  for (int i = 0; i < 200; ++i) train.push_back(blob_scene(side, 1000 + i).cast<float>());
  const PatternBank bank = make_hadamard_patterns(n_meas, side, side);

  DlRecConfig cfg;
  cfg.epochs = 15;
  DlRec rec(n_meas, side, cfg);
  const auto losses = rec.train(train, bank);
  CHECK(losses.back() < losses.front());  // training MSE decreases

  TvConfig tv_cfg;
  tv_cfg.max_iters = 120;
  double dl_mse = 0.0, tv_mse = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Matrix scene = blob_scene(side, 5000 + i);
    const MeasurementVector m = simulate_measurements(scene, bank);
    const ReconstructedImage dl = rec.reconstruct(m);
    CHECK(dl.pixels.minCoeff() >= 0.0);
    CHECK(dl.pixels.maxCoeff() <= 1.0);
    dl_mse += (dl.pixels - scene).squaredNorm() / scene.size();
    const ReconstructedImage tvr = tv_reconstruct(m, bank, tv_cfg);
    tv_mse += (tvr.pixels - scene).squaredNorm() / scene.size();

    const ReconstructedImage dl2 = rec.reconstruct(m);
    CHECK(dl.pixels == dl2.pixels);  // deterministic
  }
  CHECK(dl_mse < tv_mse);

  MeasurementVector bad;
  bad.values = Vector::Zero(7);
  CHECK_THROWS_AS(rec.reconstruct(bad), ShapeError);
}

TEST_CASE("image segmenter trains on clean blobs and segments them") {
  const int side = 64;
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 80; ++i) {
    LabeledSample s;
    s.scene = blob_scene(side, 300 + i).cast<float>();
    s.labels = LabelMap(side, side);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) s.labels(y, x) = s.scene(y, x) > 0.5f ? 1 : 0;
    }
    samples.push_back(std::move(s));
  }
  SegmenterConfig cfg;
  cfg.epochs = 10;
  cfg.base = 8;  // enough for a binary blob task
  ImageSegmenter seg(side, 2, cfg);
  const auto losses = seg.train(samples);
  CHECK(losses.back() < losses.front());

  const LabelMap pred = seg.predict(samples[0].scene);
  CHECK(pred.rows() == side);
  CHECK(pixel_accuracy(pred, samples[0].labels) > 90.0);

  const LabelMap again = seg.predict(samples[0].scene);
  CHECK(pred == again);
}
