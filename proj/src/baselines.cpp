#include "spixseg/baselines.hpp"

#include <cmath>
#include <numeric>

#include "spixseg/nn/adam.hpp"
#include "spixseg/nn/batch.hpp"
#include "spixseg/rng.hpp"
#include "spixseg/training.hpp"

namespace spixseg {

namespace {

using nn::Mat;

/// Row-normalized sensing system ("measurements normalized by pattern
/// energy"); lambda is calibrated against this scaling.
struct NormalizedSystem {
  Matrix A;  // N x pixels
  Vector s;
  int h, w;
};

NormalizedSystem normalized_system(const MeasurementVector& m, const PatternBank& bank) {
  require_shape(m.values.size() == bank.count(),
                "tv_reconstruct: measurement length does not match pattern bank");
  NormalizedSystem sys;
  sys.A = bank.flat();
  sys.s = m.values;
  sys.h = bank.height();
  sys.w = bank.width();
  for (Eigen::Index i = 0; i < sys.A.rows(); ++i) {
    const double e = sys.A.row(i).norm();
    if (e > 0) {
      sys.A.row(i) /= e;
      sys.s[i] /= e;
    }
  }
  return sys;
}

// Forward differences with zero boundary: p (vertical), q (horizontal).
void tv_gradients(const Matrix& x, Matrix& p, Matrix& q) {
  const Eigen::Index h = x.rows(), w = x.cols();
  p.setZero(h, w);
  q.setZero(h, w);
  p.topRows(h - 1) = x.bottomRows(h - 1) - x.topRows(h - 1);
  q.leftCols(w - 1) = x.rightCols(w - 1) - x.leftCols(w - 1);
}

// Adjoint: (div-like) L(p,q)[i,j] = p[i-1,j]-p[i,j] + q[i,j-1]-q[i,j] so that
// <L(p,q), x> = -<(p,q), grad x>; we use x_out = b - tau*Lt with Lt below.
Matrix tv_divergence(const Matrix& p, const Matrix& q) {
  const Eigen::Index h = p.rows(), w = p.cols();
  Matrix d = Matrix::Zero(h, w);
  d.topRows(h - 1) += p.topRows(h - 1);
  d.bottomRows(h - 1) -= p.topRows(h - 1);
  d.leftCols(w - 1) += q.leftCols(w - 1);
  d.rightCols(w - 1) -= q.leftCols(w - 1);
  return d;
}

void project_dual(Matrix& p, Matrix& q, TvConfig::Kind kind) {
  if (kind == TvConfig::Kind::anisotropic) {
    p = p.cwiseMax(-1.0).cwiseMin(1.0);
    q = q.cwiseMax(-1.0).cwiseMin(1.0);
  } else {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double n = std::sqrt(p(i, j) * p(i, j) + q(i, j) * q(i, j));
        if (n > 1.0) {
          p(i, j) /= n;
          q(i, j) /= n;
        }
      }
    }
  }
}

/// prox_{tau TV}(b) by fast gradient projection on the dual, warm-started.
Matrix tv_prox(const Matrix& b, double tau, TvConfig::Kind kind, int iters, Matrix& p, Matrix& q) {
  if (tau <= 0) return b;
  const Eigen::Index h = b.rows(), w = b.cols();
  if (p.rows() != h || p.cols() != w) {
    p = Matrix::Zero(h, w);
    q = Matrix::Zero(h, w);
  }
  Matrix rp = p, rq = q;
  double t = 1.0;
  Matrix gp, gq;
  for (int k = 0; k < iters; ++k) {
    const Matrix u = b - tau * tv_divergence(rp, rq);
    // Dual ascent direction is -grad(u) under this divergence convention.
    tv_gradients(u, gp, gq);
    Matrix pn = rp - gp / (8.0 * tau);
    Matrix qn = rq - gq / (8.0 * tau);
    project_dual(pn, qn, kind);
    const double tn = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    rp = pn + ((t - 1.0) / tn) * (pn - p);
    rq = qn + ((t - 1.0) / tn) * (qn - q);
    p.swap(pn);
    q.swap(qn);
    t = tn;
  }
  return b - tau * tv_divergence(p, q);
}

double spectral_norm_sq(const Matrix& A) {
  // Power iteration on A^T A; deterministic start.
  Vector v = Vector::Ones(A.cols());
  v.normalize();
  double lam = 1.0;
  for (int k = 0; k < 50; ++k) {
    Vector u = A.transpose() * (A * v);
    lam = u.norm();
    if (lam <= 0) return 1.0;
    v = u / lam;
  }
  return lam;
}

}  // namespace

double tv_value(const Matrix& x, TvConfig::Kind kind) {
  Matrix p, q;
  tv_gradients(x, p, q);
  if (kind == TvConfig::Kind::anisotropic) {
    return p.cwiseAbs().sum() + q.cwiseAbs().sum();
  }
  return (p.array().square() + q.array().square()).sqrt().sum();
}

double tv_objective(const Matrix& image, const MeasurementVector& m, const PatternBank& bank,
                    const TvConfig& cfg) {
  const NormalizedSystem sys = normalized_system(m, bank);
  Eigen::Map<const Vector> x(image.data(), image.size());
  return 0.5 * (sys.A * x - sys.s).squaredNorm() + cfg.lambda * tv_value(image, cfg.kind);
}

Matrix tv_data_gradient(const Matrix& image, const MeasurementVector& m, const PatternBank& bank) {
  const NormalizedSystem sys = normalized_system(m, bank);
  Eigen::Map<const Vector> x(image.data(), image.size());
  Vector g = sys.A.transpose() * (sys.A * x - sys.s);
  return Eigen::Map<const Matrix>(g.data(), image.rows(), image.cols());
}

ReconstructedImage tv_reconstruct(const MeasurementVector& m, const PatternBank& bank,
                                  const TvConfig& cfg) {
  cfg.validate();
  const NormalizedSystem sys = normalized_system(m, bank);
  const Eigen::Index h = sys.h, w = sys.w;

  auto data_term = [&](const Matrix& img) {
    Eigen::Map<const Vector> x(img.data(), img.size());
    return 0.5 * (sys.A * x - sys.s).squaredNorm();
  };
  auto objective = [&](const Matrix& img) {
    return data_term(img) + cfg.lambda * tv_value(img, cfg.kind);
  };
  auto gradient = [&](const Matrix& img) {
    Eigen::Map<const Vector> x(img.data(), img.size());
    Vector g = sys.A.transpose() * (sys.A * x - sys.s);
    return Matrix(Eigen::Map<const Matrix>(g.data(), h, w));
  };

  double L = std::max(1e-12, spectral_norm_sq(sys.A));

  Matrix x = Matrix::Zero(h, w);
  Matrix x_prev = x;
  Matrix y = x;
  Matrix dual_p, dual_q;
  double t = 1.0;

  ReconstructedImage out;
  out.objective_trace.push_back(objective(x));

  for (int k = 0; k < cfg.max_iters; ++k) {
    Matrix g = gradient(y);
    Matrix z;
    if (cfg.step == TvConfig::Step::backtracking) {
      const double fy = data_term(y);
      for (int bt = 0; bt < 60; ++bt) {
        z = tv_prox(y - g / L, cfg.lambda / L, cfg.kind, cfg.inner_iters, dual_p, dual_q);
        const Matrix d = z - y;
        const double quad = fy + (g.array() * d.array()).sum() + 0.5 * L * d.squaredNorm();
        if (data_term(z) <= quad + 1e-12) break;
        L *= 2.0;
      }
    } else {
      z = tv_prox(y - g / L, cfg.lambda / L, cfg.kind, cfg.inner_iters, dual_p, dual_q);
    }

    // Monotone safeguard: keep the better of the accelerated point and the
    // previous iterate.
    const double fz = objective(z);
    const double fx = out.objective_trace.back();
    x_prev = x;
    if (fz <= fx) {
      x = z;
      out.objective_trace.push_back(fz);
    } else {
      out.objective_trace.push_back(fx);
    }

    const double tn = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    y = x + (t / tn) * (z - x) + ((t - 1.0) / tn) * (x - x_prev);
    t = tn;
    out.iters_used = k + 1;

    const double prev = out.objective_trace[out.objective_trace.size() - 2];
    const double cur = out.objective_trace.back();
    if (std::abs(prev - cur) <= cfg.tol * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
  }
  out.pixels = x.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

// --- DL-Rec -------------------------------------------------------------------

DlRec::DlRec(int n_measurements, int side, const DlRecConfig& cfg)
    : cfg_(cfg), n_meas_(n_measurements), side_(side) {
  fc_ = nn::Dense<float>(params_, "fc", nn::ParamGroup::head, n_measurements, side * side);
  const int c = cfg.refine_channels;
  convs_.emplace_back(params_, "refine0", nn::ParamGroup::head, 1, c, 3);
  convs_.emplace_back(params_, "refine1", nn::ParamGroup::head, c, c, 3);
  convs_.emplace_back(params_, "refine2", nn::ParamGroup::head, c, 1, 3);
  // Fixed per-index input standardization (set from the training set; the
  // raw measurement scale depends on the bank). Zero gradients keep Adam
  // away from these entries; they ride along in the tensor store.
  norm_mean_ = params_.add("norm.mean", nn::ParamGroup::head, true, nn::InitKind::zero, 0,
                           n_measurements, 1);
  norm_std_ = params_.add("norm.std", nn::ParamGroup::head, true, nn::InitKind::zero, 0,
                          n_measurements, 1);
  initialize_params(params_, cfg.seed);
  params_[norm_std_].setOnes();
}

nn::Mat<float> DlRec::forward(const Mat<float>& meas, nn::Workspace<float>& ws,
                              std::vector<Mat<float>>* acts) const {
  Mat<float> normed =
      (meas - params_[norm_mean_]).cwiseQuotient(params_[norm_std_]);
  Mat<float> v = fc_.forward(params_, normed);
  Mat<float> img = v.transpose();  // 1 x HW feature map
  if (acts) acts->push_back(img);
  Mat<float> cur = img;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    Mat<float> z = convs_[i].forward(params_, cur, side_, side_, ws);
    if (acts) acts->push_back(z);
    cur = i + 1 < convs_.size() ? nn::relu(z) : z;
    if (acts && i + 1 < convs_.size()) acts->push_back(cur);
  }
  return cur;
}

std::vector<double> DlRec::train(const std::vector<MatrixF>& scenes, const PatternBank& bank) {
  require(!scenes.empty(), "dlrec: empty training set");
  require_shape(bank.count() == n_meas_, "dlrec: bank size does not match the model");
  Eigen::setNbThreads(1);

  std::vector<Mat<float>> meas;
  std::vector<Mat<float>> targets;
  meas.reserve(scenes.size());
  targets.reserve(scenes.size());
  Vector mean = Vector::Zero(n_meas_);
  Vector sq = Vector::Zero(n_meas_);
  for (const auto& s : scenes) {
    MeasurementVector m = simulate_measurements(s.cast<double>(), bank);
    mean += m.values;
    sq += m.values.cwiseProduct(m.values);
    meas.push_back(m.values.cast<float>());
    targets.push_back(
        Eigen::Map<const Eigen::VectorXf>(s.data(), s.size()).transpose());  // 1 x HW
  }
  mean /= static_cast<double>(scenes.size());
  for (int i = 0; i < n_meas_; ++i) {
    const double var = std::max(0.0, sq[i] / scenes.size() - mean[i] * mean[i]);
    const double sd = std::sqrt(var);
    params_[norm_mean_](i, 0) = static_cast<float>(mean[i]);
    params_[norm_std_](i, 0) = sd > 1e-12 ? static_cast<float>(sd) : 1.0f;
  }

  nn::Adam<float> opt(params_, {.weight_decay = cfg_.weight_decay});
  nn::BatchContext<float> ctx(params_);
  const int n = static_cast<int>(scenes.size());
  const int pixels = side_ * side_;
  std::vector<double> losses;

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg_.lr0, cfg_.decay, cfg_.decay_every);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::fork(cfg_.seed, 0x444c5245ULL + static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg_.batch_size) {
      const int bsz = std::min(cfg_.batch_size, n - start);
      const float inv_b = 1.0f / static_cast<float>(bsz);
      const double batch_loss = nn::run_batch(
          ctx, bsz, [&](int i, nn::GradBuf<float>& g, nn::Workspace<float>& ws) {
            const std::size_t idx =
                static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)]);
            // acts layout: img, z0, a0, z1, a1, z2
            std::vector<Mat<float>> acts;
            Mat<float> pred = forward(meas[idx], ws, &acts);
            Mat<float> diff = pred - targets[idx];
            const double loss = diff.squaredNorm() / pixels;
            Mat<float> gy = diff * (2.0f / static_cast<float>(pixels)) * inv_b;
            gy = convs_[2].backward(params_, acts[4], side_, side_, gy, g, ws);
            gy = nn::relu_backward(acts[3], gy);
            gy = convs_[1].backward(params_, acts[2], side_, side_, gy, g, ws);
            gy = nn::relu_backward(acts[1], gy);
            gy = convs_[0].backward(params_, acts[0], side_, side_, gy, g, ws);
            Mat<float> gfc = gy.transpose();
            Mat<float> normed =
                (meas[idx] - params_[norm_mean_]).cwiseQuotient(params_[norm_std_]);
            fc_.backward(params_, normed, gfc, g);
            return loss;
          });
      epoch_loss += batch_loss;
      opt.step(params_, ctx.total, lr, nn::TrainScope::full);
    }
    losses.push_back(epoch_loss / n);
  }
  return losses;
}

ReconstructedImage DlRec::reconstruct(const MeasurementVector& m) const {
  require_shape(m.values.size() == n_meas_, "dlrec: measurement length mismatch");
  nn::Workspace<float> ws;
  Mat<float> meas = m.values.cast<float>();
  Mat<float> img = forward(meas, ws, nullptr);
  ReconstructedImage out;
  out.pixels = Matrix(side_, side_);
  for (int y = 0; y < side_; ++y) {
    for (int x = 0; x < side_; ++x) {
      out.pixels(y, x) = std::clamp(static_cast<double>(img(0, y * side_ + x)), 0.0, 1.0);
    }
  }
  out.converged = true;
  out.iters_used = 1;
  return out;
}

// --- image segmenter ----------------------------------------------------------

ImageSegmenter::ImageSegmenter(int side, int n_classes, const SegmenterConfig& cfg)
    : cfg_(cfg), side_(side), n_classes_(n_classes) {
  stem_ = nn::Conv2d<float>(params_, "stem", nn::ParamGroup::head, 1, 1, 3);
  head_ = nn::UnetPPHead<float>(params_, "seg", 1, cfg.base, n_classes);
  initialize_params(params_, cfg.seed);
}

nn::Mat<float> ImageSegmenter::forward(const Mat<float>& img, nn::Workspace<float>& ws,
                                       Mat<float>* stem_out,
                                       typename nn::UnetPPHead<float>::Acts* acts) const {
  Mat<float> stem = stem_.forward(params_, img, side_, side_, ws);
  if (stem_out) *stem_out = stem;
  typename nn::UnetPPHead<float>::Acts local;
  auto& a = acts ? *acts : local;
  return head_.forward(params_, stem, side_, side_, a, ws);
}

std::vector<double> ImageSegmenter::train(const std::vector<LabeledSample>& samples) {
  require(!samples.empty(), "segmenter: empty training set");
  Eigen::setNbThreads(1);

  std::vector<Mat<float>> images;
  std::vector<Mat<float>> targets;
  for (const auto& s : samples) {
    images.push_back(Eigen::Map<const Eigen::VectorXf>(s.scene.data(), s.scene.size()).transpose());
    targets.push_back(one_hot_targets(s.labels, n_classes_));
  }

  nn::Adam<float> opt(params_, {.weight_decay = cfg_.weight_decay});
  nn::BatchContext<float> ctx(params_);
  const int n = static_cast<int>(samples.size());
  const double denom = static_cast<double>(n_classes_) * side_ * side_;
  std::vector<double> losses;

  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg_.lr0, cfg_.decay, cfg_.decay_every);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::fork(cfg_.seed, 0x53454747ULL + static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg_.batch_size) {
      const int bsz = std::min(cfg_.batch_size, n - start);
      const float inv_b = 1.0f / static_cast<float>(bsz);
      const double batch_loss = nn::run_batch(
          ctx, bsz, [&](int i, nn::GradBuf<float>& g, nn::Workspace<float>& ws) {
            const std::size_t idx =
                static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)]);
            Mat<float> stem;
            typename nn::UnetPPHead<float>::Acts acts;
            Mat<float> logits = forward(images[idx], ws, &stem, &acts);
            Mat<float> diff = logits - targets[idx];
            const double loss = diff.squaredNorm() / denom;
            Mat<float> gy = diff * static_cast<float>(2.0 / denom) * inv_b;
            Mat<float> gstem = head_.backward(params_, acts, side_, side_, gy, g, ws);
            stem_.backward(params_, images[idx], side_, side_, gstem, g, ws, false);
            return loss;
          });
      epoch_loss += batch_loss;
      opt.step(params_, ctx.total, lr, nn::TrainScope::full);
    }
    epoch_loss /= n;
    if (!std::isfinite(epoch_loss)) throw Error("segmenter training diverged");
    losses.push_back(epoch_loss);
  }
  return losses;
}

LabelMap ImageSegmenter::predict(const MatrixF& scene) const {
  nn::Workspace<float> ws;
  Mat<float> img = Eigen::Map<const Eigen::VectorXf>(scene.data(), scene.size()).transpose();
  Mat<float> logits = forward(img, ws, nullptr, nullptr);
  LabelMap out(side_, side_);
  for (int y = 0; y < side_; ++y) {
    for (int x = 0; x < side_; ++x) {
      const Eigen::Index j = static_cast<Eigen::Index>(y) * side_ + x;
      int best = 0;
      for (int c = 1; c < n_classes_; ++c) {
        if (logits(c, j) > logits(best, j)) best = c;
      }
      out(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

LabelMap ImageSegmenter::predict(const Matrix& scene) const {
  MatrixF f = scene.cast<float>();
  return predict(f);
}

BaselineMethod baseline_method_from_string(const std::string& s) {
  if (s == "tvrec") return BaselineMethod::tvrec;
  if (s == "dlrec") return BaselineMethod::dlrec;
  throw ConfigError("unknown baseline method: " + s);
}

MetricRow run_baseline_pipeline(const std::vector<LabeledSample>& test, const PatternBank& bank,
                                BaselineMethod method, const TvConfig& tv_cfg, const DlRec* dlrec,
                                const ImageSegmenter& segmenter, const NoiseModel& noise) {
  require(!test.empty(), "baseline pipeline: empty test set");
  if (method == BaselineMethod::dlrec) {
    require(dlrec != nullptr, "baseline pipeline: dlrec model required");
  }
  std::vector<LabelMap> preds(test.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < test.size(); ++i) {
    const MeasurementVector m = simulate_measurements(test[i].scene.cast<double>(), bank, noise);
    const ReconstructedImage rec =
        method == BaselineMethod::tvrec ? tv_reconstruct(m, bank, tv_cfg) : dlrec->reconstruct(m);
    preds[i] = segmenter.predict(rec.pixels);
  }
  const auto fg = foreground_classes(segmenter.n_classes());
  double pa_sum = 0.0, dice_sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    pa_sum += pixel_accuracy(preds[i], test[i].labels);
    dice_sum += dice(preds[i], test[i].labels, fg);
  }
  MetricRow row;
  row.method = method == BaselineMethod::tvrec ? "tvrec" : "dlrec";
  row.pa = pa_sum / static_cast<double>(test.size());
  row.dice = dice_sum / static_cast<double>(test.size());
  row.n_samples = static_cast<int>(test.size());
  return row;
}

}  // namespace spixseg
