#include "spixseg/training.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "spixseg/digest.hpp"
#include "spixseg/nn/batch.hpp"

namespace spixseg {

namespace {

using nn::GradBuf;
using nn::Mat;
using nn::ParamStore;
using nn::SegNet;
using nn::TrainScope;
using nn::Workspace;
using BatchContext = nn::BatchContext<float>;
using nn::run_batch;

Mat<float> flat_column(const MatrixF& scene) {
  return Eigen::Map<const Eigen::VectorXf>(scene.data(), scene.size());
}

std::vector<int> epoch_order(int n, std::uint64_t seed, int stage, int epoch) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::fork(seed, 0x45504f43ULL + static_cast<std::uint64_t>(stage) * 1000003ULL +
                                static_cast<std::uint64_t>(epoch));
  rng.shuffle(idx);
  return idx;
}

void check_finite(double loss, int stage, int epoch) {
  if (!std::isfinite(loss)) {
    throw Error("training diverged: non-finite loss at stage " + std::to_string(stage) +
                " epoch " + std::to_string(epoch));
  }
}

void limit_eigen_threads() {
  // Batch-level parallelism only; nested Eigen threading would oversubscribe.
  Eigen::setNbThreads(1);
}

}  // namespace

void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream f(path);
  require(f.good(), "cannot write train report " + path.string());
  f << "epoch,stage,lr,loss\n";
  char buf[96];
  for (const auto& r : report.curve) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g\n", r.epoch, r.stage, r.lr, r.loss);
    f << buf;
  }
}

void initialize(nn::SegNet<float>& model, std::uint64_t seed) {
  initialize_params(model.params(), seed);
}

void set_encoder_from_bank(nn::SegNet<float>& model, const Matrix& bank_flat) {
  auto& filters = model.encoder_filters();
  require_shape(bank_flat.rows() == filters.rows() && bank_flat.cols() == filters.cols(),
                "set_encoder_from_bank: bank shape does not match encoder");
  filters = bank_flat.cast<float>();
}

nn::Mat<float> one_hot_targets(const LabelMap& labels, int n_classes) {
  Mat<float> t = Mat<float>::Zero(n_classes, labels.size());
  const auto* data = labels.data();
  for (Eigen::Index j = 0; j < labels.size(); ++j) {
    const int c = data[j];
    require(c >= 0 && c < n_classes, "label map contains a class id outside [0, n_classes)");
    t(c, j) = 1.0f;
  }
  return t;
}

TrainReport train_stage1(nn::SegNet<float>& model, const std::vector<MatrixF>& scenes,
                         const TrainConfig& cfg, bool train_encoder, int start_epoch,
                         nn::Adam<float>* resume_opt) {
  cfg.validate();
  require(!scenes.empty(), "stage 1: empty pretraining dataset");
  limit_eigen_threads();
  const auto t0 = std::chrono::steady_clock::now();
  const int pixels = model.config().pixels();
  const TrainScope scope = train_encoder ? TrainScope::stage1 : TrainScope::stage1_fixed;

  nn::Adam<float> local_opt(model.params(), {.weight_decay = cfg.weight_decay});
  nn::Adam<float>& opt = resume_opt ? *resume_opt : local_opt;
  BatchContext ctx(model.params());

  std::vector<Mat<float>> flats;
  flats.reserve(scenes.size());
  for (const auto& s : scenes) {
    require_shape(static_cast<int>(s.size()) == pixels, "stage 1: scene size mismatch");
    flats.push_back(flat_column(s));
  }

  TrainReport report;
  const int n = static_cast<int>(scenes.size());
  for (int epoch = start_epoch; epoch < cfg.stage1.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg.stage1.lr0, cfg.stage1.decay, cfg.stage1.decay_every);
    const auto order = epoch_order(n, cfg.seed, 1, epoch);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      const float inv_b = 1.0f / static_cast<float>(bsz);
      const double batch_loss =
          run_batch(ctx, bsz, [&](int i, GradBuf<float>& g, Workspace<float>& ws) {
            const Mat<float>& x = flats[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
            SegNet<float>::Acts acts;
            Mat<float> feat = model.forward_features(x, acts, ws);
            Mat<float> diff = feat - x.transpose();
            const double loss = diff.squaredNorm() / static_cast<double>(pixels);
            Mat<float> gfeat = diff * (2.0f / static_cast<float>(pixels)) * inv_b;
            model.backward_from_features(acts, gfeat, scope, g, ws);
            return loss;
          });
      opt.step(model.params(), ctx.total, lr, scope);
      epoch_loss += batch_loss;
    }
    epoch_loss /= n;
    check_finite(epoch_loss, 1, epoch);
    report.curve.push_back({epoch, 1, lr, epoch_loss});
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

TrainReport train_stage2(nn::SegNet<float>& model, const std::vector<LabeledSample>& samples,
                         const TrainConfig& cfg, bool train_encoder, int start_epoch,
                         nn::Adam<float>* resume_opt) {
  cfg.validate();
  require(!samples.empty(), "stage 2: empty segmentation dataset");
  limit_eigen_threads();
  const auto t0 = std::chrono::steady_clock::now();
  const int pixels = model.config().pixels();
  const int n_classes = model.config().n_classes;
  const TrainScope scope = train_encoder ? TrainScope::full : TrainScope::decoder_only;

  nn::Adam<float> local_opt(model.params(), {.weight_decay = cfg.weight_decay});
  nn::Adam<float>& opt = resume_opt ? *resume_opt : local_opt;
  BatchContext ctx(model.params());

  std::vector<Mat<float>> flats;
  std::vector<Mat<float>> targets;
  flats.reserve(samples.size());
  targets.reserve(samples.size());
  for (const auto& s : samples) {
    require_shape(static_cast<int>(s.scene.size()) == pixels, "stage 2: scene size mismatch");
    flats.push_back(flat_column(s.scene));
    targets.push_back(one_hot_targets(s.labels, n_classes));
  }

  TrainReport report;
  const int n = static_cast<int>(samples.size());
  const double denom = static_cast<double>(n_classes) * pixels;
  for (int epoch = start_epoch; epoch < cfg.stage2.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg.stage2.lr0, cfg.stage2.decay, cfg.stage2.decay_every);
    const auto order = epoch_order(n, cfg.seed, 2, epoch);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      const float inv_b = 1.0f / static_cast<float>(bsz);
      const double batch_loss =
          run_batch(ctx, bsz, [&](int i, GradBuf<float>& g, Workspace<float>& ws) {
            const std::size_t idx = static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)]);
            SegNet<float>::Acts acts;
            Mat<float> logits = model.forward(flats[idx], acts, ws);
            Mat<float> diff = logits - targets[idx];
            const double loss = diff.squaredNorm() / denom;
            Mat<float> glogits = diff * static_cast<float>(2.0 / denom) * inv_b;
            model.backward_from_logits(acts, glogits, scope, g, ws);
            return loss;
          });
      opt.step(model.params(), ctx.total, lr, scope);
      epoch_loss += batch_loss;
    }
    epoch_loss /= n;
    check_finite(epoch_loss, 2, epoch);
    report.curve.push_back({epoch, 2, lr, epoch_loss});
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

MeasurementStats measurement_stats(const nn::SegNet<float>& model,
                                   const std::vector<LabeledSample>& samples) {
  require(!samples.empty(), "measurement_stats: empty sample set");
  const int n_meas = model.config().n_measurements;
  Vector sum = Vector::Zero(n_meas);
  Vector sum_sq = Vector::Zero(n_meas);
  for (const auto& s : samples) {
    Mat<float> m = model.encode(flat_column(s.scene));
    for (int i = 0; i < n_meas; ++i) {
      const double v = m(i, 0);
      sum[i] += v;
      sum_sq[i] += v * v;
    }
  }
  const double n = static_cast<double>(samples.size());
  MeasurementStats st;
  st.mean = sum / n;
  st.stddev = Vector(n_meas);
  for (int i = 0; i < n_meas; ++i) {
    const double var = std::max(0.0, sum_sq[i] / n - st.mean[i] * st.mean[i]);
    st.stddev[i] = std::sqrt(var);
  }
  return st;
}

template <typename T>
std::string group_checksum(const nn::ParamStore<T>& ps, nn::ParamGroup g) {
  Sha256 h;
  for (const auto& e : ps.entries()) {
    if (e.group != g) continue;
    h.update(e.value.data(), sizeof(T) * static_cast<std::size_t>(e.value.size()));
  }
  return to_hex(h.finish());
}

template std::string group_checksum<float>(const nn::ParamStore<float>&, nn::ParamGroup);
template std::string group_checksum<double>(const nn::ParamStore<double>&, nn::ParamGroup);

}  // namespace spixseg
