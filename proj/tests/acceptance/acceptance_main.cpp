// Acceptance gate: one pass/fail line per criterion, non-zero exit on any
// failure. Heavy training cells cache under SPIXSEG_ACCEPT_DIR, so reruns
// are cheap.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spixseg/baselines.hpp"
#include "spixseg/experiment.hpp"
#include "spixseg/measurement_io.hpp"
#include "spixseg/rng.hpp"
#include "spixseg/training.hpp"

using namespace spixseg;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// The criterion-7 configuration: quarter-size synthetic WBC corpus, N=40,
/// stage-1 30 epochs on 1200 natural images, stage-2 100 epochs.
ExperimentConfig acceptance_config() {
  ExperimentConfig cfg;
  cfg.name = "acceptance";
  cfg.seed = 1;
  if (const char* dir = std::getenv("SPIXSEG_ACCEPT_DIR"); dir && *dir) {
    cfg.cache_dir = dir;
  } else {
    cfg.cache_dir = "acceptance_work";
  }
  cfg.data.kind = "wbc_synth";
  cfg.data.synth_seed = 20240;
  cfg.data.aug_seed = 77;
  cfg.data.split_seed = 99;
  cfg.data.subset_fraction = 0.25;  // 3600 -> 900 -> 675/225
  cfg.natural.count = 1200;
  cfg.natural.seed = 5;
  cfg.sampling_ratio = 0.01;  // 40 measurements at 64x64
  cfg.modulation = "optimized";
  cfg.training = "two_stage";
  cfg.train.stage1 = {2e-3, 0.8, 20, 30};
  cfg.train.stage2 = {1e-3, 0.8, 50, 100};
  cfg.train.weight_decay = 1e-4;
  cfg.train.batch_size = 32;
  cfg.segmenter.epochs = 60;
  return cfg;
}

Matrix random_scene(int side, Rng& rng) {
  Matrix s(side, side);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform();
  return s;
}

void criterion1_forward_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int side = t % 2 ? 64 : 32;
    const int n = 1 + static_cast<int>(rng.below(12));
    const PatternBank bank = make_random_patterns(n, side, side, 500 + t);
    const Matrix scene = random_scene(side, rng);
    const Vector got = simulate_measurements(scene, bank).values;
    for (int i = 0; i < n; ++i) {
      double expect = 0.0;
      for (Eigen::Index y = 0; y < side; ++y) {
        for (Eigen::Index x = 0; x < side; ++x) {
          expect += scene(y, x) * bank.pattern(i).values(y, x);
        }
      }
      worst = std::max(worst, std::abs(got[i] - expect) / std::abs(expect));
    }
  }
  char d[128];
  std::snprintf(d, sizeof(d), "max rel err %.3g over 100 pairs, %.1fs", worst, seconds_since(t0));
  report(1, "forward-model oracle (<= 1e-9)", worst <= 1e-9, d);
}

void criterion2_encoder_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  nn::NetworkConfig net;
  net.n_measurements = 40;
  nn::SegNet<float> model(net);
  initialize(model, 11);
  const PatternBank bank = patterns_from_encoder(model.encoder_filters(), 64, 64);

  Rng rng(102);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Matrix scene = random_scene(64, rng);
    const Vector ref = simulate_measurements(scene, bank).values;
    nn::Mat<float> flat(scene.size(), 1);
    for (Eigen::Index i = 0; i < scene.size(); ++i) flat(i, 0) = static_cast<float>(scene.data()[i]);
    const nn::Mat<float> got = model.encode(flat);
    double num = 0.0;
    for (int i = 0; i < 40; ++i) num += std::pow(got(i, 0) - ref[i], 2);
    worst = std::max(worst, std::sqrt(num) / ref.norm());
  }
  char d[128];
  std::snprintf(d, sizeof(d), "max rel err %.3g over 100 scenes, %.1fs", worst, seconds_since(t0));
  report(2, "encoder/sensing equivalence (<= 1e-5)", worst <= 1e-5, d);
}

void criterion3_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  nn::NetworkConfig cfg;
  cfg.n_measurements = 4;
  cfg.scene_h = cfg.scene_w = 8;
  cfg.n_classes = 2;
  cfg.fsrcnn = {8, 4, 2, 5, 1, 3, 1, 9};
  cfg.head = {2, 4};
  cfg.class_names = {"background", "foreground"};
  nn::SegNet<double> model(cfg);
  initialize_params(model.params(), 51);

  Rng rng(103);
  nn::Mat<double> scene(cfg.pixels(), 1);
  for (Eigen::Index i = 0; i < scene.size(); ++i) scene(i, 0) = rng.uniform();
  nn::Mat<double> target = nn::Mat<double>::Zero(cfg.n_classes, cfg.pixels());
  for (Eigen::Index j = 0; j < target.cols(); ++j) target(rng.below(2) ? 1 : 0, j) = 1.0;

  const double denom = static_cast<double>(cfg.n_classes) * cfg.pixels();
  nn::Workspace<double> ws;
  auto loss = [&] {
    nn::SegNet<double>::Acts acts;
    nn::Mat<double> logits = model.forward(scene, acts, ws);
    return (logits - target).squaredNorm() / denom;
  };
  nn::SegNet<double>::Acts acts;
  nn::Mat<double> logits = model.forward(scene, acts, ws);
  nn::GradBuf<double> g = model.params().zero_grads();
  nn::Mat<double> glogits = (logits - target) * (2.0 / denom);
  model.backward_from_logits(acts, glogits, nn::TrainScope::full, g, ws);

  double group_worst[4] = {0, 0, 0, 0};
  const double eps = 1e-5;
  for (std::size_t t = 0; t < g.size(); ++t) {
    auto& e = model.params().entries()[t];
    for (Eigen::Index i = 0; i < e.value.size(); ++i) {
      const double saved = e.value.data()[i];
      e.value.data()[i] = saved + eps;
      const double up = loss();
      e.value.data()[i] = saved - eps;
      const double down = loss();
      e.value.data()[i] = saved;
      const double fd = (up - down) / (2 * eps);
      const double an = g[t].data()[i];
      const double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      group_worst[static_cast<int>(e.group)] = std::max(group_worst[static_cast<int>(e.group)], err);
    }
  }
  const double worst = *std::max_element(group_worst, group_worst + 4);
  char d[200];
  std::snprintf(d, sizeof(d),
                "rel err by group: encoder %.2g, expand %.2g, fsrcnn %.2g, head %.2g, %.1fs",
                group_worst[0], group_worst[1], group_worst[2], group_worst[3], seconds_since(t0));
  report(3, "finite-difference gradient check (<= 1e-4 per group)", worst <= 1e-4, d);
}

void criterion4_hadamard() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why = "orders 4,16,64,1024,4096";
  for (int order : {4, 16, 64, 1024, 4096}) {
    int h = 1;
    while (h * h < order) h *= 2;
    const int w = order / h;
    const PatternBank bank = make_hadamard_patterns(order, h, w, HadamardOrdering::natural);
    // +-1 sums up to order stay exact in double precision.
    const Matrix gram = bank.flat() * bank.flat().transpose();
    for (int i = 0; i < order && ok; ++i) {
      for (int j = 0; j < order; ++j) {
        if (gram(i, j) != (i == j ? static_cast<double>(order) : 0.0)) {
          ok = false;
          why = "gram defect at order " + std::to_string(order);
          break;
        }
      }
    }
    const PatternBank seq = make_hadamard_patterns(order, h, w, HadamardOrdering::sequency);
    for (int i = 0; i < order && ok; ++i) {
      int changes = 0;
      for (int j = 1; j < order; ++j) {
        if (seq.flat()(i, j) != seq.flat()(i, j - 1)) ++changes;
      }
      if (changes != i) {
        ok = false;
        why = "sequency defect at order " + std::to_string(order) + " row " + std::to_string(i);
        break;
      }
    }
    if (!ok) break;
  }
  char d[160];
  std::snprintf(d, sizeof(d), "%s, %.1fs", why.c_str(), seconds_since(t0));
  report(4, "hadamard orthogonality + sequency ordering (exact)", ok, d);
}

void criterion5_metrics() {
  LabelMap a(2, 2), b(2, 2);
  a << 0, 1, 2, 0;
  b << 0, 1, 0, 1;
  const bool ok1 = pixel_accuracy(a, a) == 100.0 && dice(a, a, {1, 2}) == 100.0;
  const bool ok2 = pixel_accuracy(b, a) == 50.0;
  LabelMap pred(2, 2), gt(2, 2);
  pred << 1, 1, 0, 0;
  gt << 1, 0, 1, 0;
  const bool ok3 = dice(pred, gt, {1}) == 50.0;
  report(5, "metric hand-cases exact", ok1 && ok2 && ok3,
         ok1 && ok2 && ok3 ? "identity 100.0, half-wrong 50.0, dice 50.0" : "mismatch");
}

void criterion6_augmentation(const ExperimentConfig& base) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = base;
  cfg.data.subset_fraction = 1.0;  // full-scale arithmetic
  const PreparedDataset ds = prepare_data(cfg);
  int originals = 0;
  for (const auto& s : ds.train) {
    if (s.augmentation_tag.find('+') == std::string::npos) ++originals;
  }
  for (const auto& s : ds.test) {
    if (s.augmentation_tag.find('+') == std::string::npos) ++originals;
  }
  const bool ok = ds.manifest.raw_count == 300 && ds.manifest.augmented_count == 3600 &&
                  originals == 1200 && ds.manifest.train_count == 2700 &&
                  ds.manifest.test_count == 900;
  char d[160];
  std::snprintf(d, sizeof(d), "300 -> 1200 (mirror stage) -> 3600, split 2700/900, %.1fs",
                seconds_since(t0));
  report(6, "augmentation arithmetic", ok, d);
}

MetricRow heavy_cell(const ExperimentConfig& cfg, const char* what) {
  const auto t0 = std::chrono::steady_clock::now();
  bool hit = false;
  const MetricRow row = run_cell(cfg, &hit);
  std::printf("       %s: PA %.2f DICE %.2f (%s, %.0fs)\n", what, row.pa, row.dice,
              hit ? "cached" : "trained", seconds_since(t0));
  std::fflush(stdout);
  return row;
}

}  // namespace

int main() {
  Eigen::setNbThreads(1);
  const ExperimentConfig base = acceptance_config();
  std::printf("acceptance work dir: %s\n", resolve_cache_dir(base).string().c_str());

  criterion1_forward_oracle();
  criterion2_encoder_equivalence();
  criterion3_gradients();
  criterion4_hadamard();
  criterion5_metrics();
  criterion6_augmentation(base);

  // --- criterion 10 first (no training involved) ---------------------------
  {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(110);
    bool monotone = true;
    for (int t = 0; t < 50 && monotone; ++t) {
      const PatternBank bank = make_random_patterns(10, 12, 12, 700 + t);
      const MeasurementVector m = simulate_measurements(random_scene(12, rng), bank);
      TvConfig tcfg;
      tcfg.max_iters = 60;
      tcfg.kind = t % 2 ? TvConfig::Kind::isotropic : TvConfig::Kind::anisotropic;
      const ReconstructedImage rec = tv_reconstruct(m, bank, tcfg);
      for (std::size_t k = 1; k < rec.objective_trace.size(); ++k) {
        if (rec.objective_trace[k] > rec.objective_trace[k - 1] + 1e-12) {
          monotone = false;
          break;
        }
      }
    }

    const PatternBank eye = make_identity_patterns(64, 64);
    Matrix scene = Matrix::Constant(64, 64, 0.15);
    for (int y = 20; y < 44; ++y) {
      for (int x = 16; x < 40; ++x) scene(y, x) = 0.85;
    }
    TvConfig tcfg;
    tcfg.lambda = 1e-6;
    tcfg.max_iters = 60;
    const ReconstructedImage rec = tv_reconstruct(simulate_measurements(scene, eye), eye, tcfg);
    const double mse = (rec.pixels - scene).squaredNorm() / scene.size();
    const double psnr = 10.0 * std::log10(1.0 / mse);
    char d[160];
    std::snprintf(d, sizeof(d), "monotone on 50 instances: %s; identity PSNR %.1f dB, %.1fs",
                  monotone ? "yes" : "no", psnr, seconds_since(t0));
    report(10, "tv solver monotonicity + identity recovery (>= 40 dB)", monotone && psnr >= 40.0,
           d);
  }

  // --- heavy training cells -------------------------------------------------
  ExperimentConfig cfg_two = base;
  const MetricRow two_stage = heavy_cell(cfg_two, "two-stage optimized");

  ExperimentConfig cfg_one = base;
  cfg_one.training = "one_stage";
  const MetricRow one_stage = heavy_cell(cfg_one, "one-stage optimized");

  ExperimentConfig cfg_rand = base;
  cfg_rand.modulation = "random";
  const MetricRow random_mod = heavy_cell(cfg_rand, "two-stage random modulation");

  {
    char d[160];
    std::snprintf(d, sizeof(d), "PA %.2f (>= 93.0), DICE %.2f (>= 72.0), 225 held-out images",
                  two_stage.pa, two_stage.dice);
    report(7, "desk-scale reproduction at ratio 0.01", two_stage.pa >= 93.0 && two_stage.dice >= 72.0,
           d);
  }
  {
    const double gap = two_stage.dice - one_stage.dice;
    char d[160];
    std::snprintf(d, sizeof(d), "two-stage %.2f vs one-stage %.2f, gap %.2f (>= 5)", two_stage.dice,
                  one_stage.dice, gap);
    report(8, "ablation (a): two-stage beats one-stage", gap >= 5.0, d);
  }
  {
    const double gap = two_stage.dice - random_mod.dice;
    char d[160];
    std::snprintf(d, sizeof(d), "optimized %.2f vs random %.2f, gap %.2f (>= 2)", two_stage.dice,
                  random_mod.dice, gap);
    report(8, "ablation (b): optimized beats random modulation", gap >= 2.0, d);
  }

  // --- criterion 9: reconstruction crossover -------------------------------
  {
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedDataset data = prepare_data(base);
    ImageSegmenter segmenter = run_segmenter_training(base);
    const MetricRow clean = evaluate_predictor(
        [&](const LabeledSample& s) { return segmenter.predict(s.scene); }, data.test,
        base.net.n_classes);
    std::printf("       clean-image segmenter: PA %.2f DICE %.2f\n", clean.pa, clean.dice);
    std::fflush(stdout);

    ExperimentConfig cfg_tv_full = base;
    cfg_tv_full.method = "tvrec";
    cfg_tv_full.sampling_ratio = 1.0;
    cfg_tv_full.baseline_bank = "identity";
    const MetricRow tv_full = heavy_cell(cfg_tv_full, "tvrec at ratio 1.0 (identity bank)");

    ExperimentConfig cfg_tv_low = base;
    cfg_tv_low.method = "tvrec";
    cfg_tv_low.baseline_bank = "hadamard";
    const MetricRow tv_low = heavy_cell(cfg_tv_low, "tvrec at ratio 0.01 (hadamard bank)");

    const double full_gap = std::abs(clean.dice - tv_full.dice);
    const double low_gap = two_stage.dice - tv_low.dice;
    char d[240];
    std::snprintf(d, sizeof(d),
                  "ratio 1.0: |%.2f - %.2f| = %.2f (<= 2); ratio 0.01: image-free %.2f vs tv %.2f, "
                  "gap %.2f (>= 10); %.0fs",
                  clean.dice, tv_full.dice, full_gap, two_stage.dice, tv_low.dice, low_gap,
                  seconds_since(t0));
    report(9, "crossover vs reconstruction pipeline", full_gap <= 2.0 && low_gap >= 10.0, d);
  }

  // --- criterion 11: experimental path equivalence --------------------------
  {
    const auto t0 = std::chrono::steady_clock::now();
    TrainedModel trained = run_training(base);
    const PreparedDataset data = prepare_data(base);
    const auto& net = trained.model.config();
    const PatternBank bank =
        patterns_from_encoder(trained.model.encoder_filters(), net.scene_h, net.scene_w);

    const LabeledSample& sample = data.test.front();
    const MeasurementVector sim = simulate_measurements(sample.scene.cast<double>(), bank);

    const fs::path dir = resolve_cache_dir(base) / "experimental_path";
    fs::create_directories(dir);
    RawRecording rec;
    for (int i = 0; i < sim.values.size(); ++i) rec.rows.emplace_back(i, sim.values[i]);
    write_recording(rec, dir / "recording.csv");
    Calibration cal;  // identity
    write_calibration(cal, dir / "calibration.json");

    const MeasurementVector recovered =
        calibrate(read_recording(dir / "recording.csv"), read_calibration(dir / "calibration.json"),
                  bank.count(), trained.meta.meas_stats);
    nn::Workspace<float> ws;
    nn::Mat<float> meas_file = recovered.values.cast<float>();
    nn::Mat<float> meas_direct = sim.values.cast<float>();
    const LabelMap via_file = trained.model.infer_from_measurements(meas_file, ws);
    const LabelMap via_direct = trained.model.infer_from_measurements(meas_direct, ws);
    const bool identical = via_file == via_direct;
    char d[120];
    std::snprintf(d, sizeof(d), "40-value recording, label maps %s, %.1fs",
                  identical ? "identical" : "DIFFER", seconds_since(t0));
    report(11, "experimental path read->calibrate->infer", identical, d);
  }

  std::printf("%s: %d criterion failure(s)\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
