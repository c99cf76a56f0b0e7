#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spixseg/common.hpp"
#include "spixseg/datasets.hpp"
#include "spixseg/evaluation.hpp"
#include "spixseg/nn/model.hpp"
#include "spixseg/sensing.hpp"

namespace spixseg {

struct TvConfig {
  double lambda = 1e-2;  // TV weight on the row-normalized system
  int max_iters = 200;
  double tol = 1e-6;  // relative objective change stop
  enum class Kind { anisotropic, isotropic } kind = Kind::anisotropic;
  enum class Step { fixed, backtracking } step = Step::fixed;
  int inner_iters = 20;  // dual (FGP) iterations per prox

  void validate() const {
    require(lambda > 0 && max_iters >= 1 && tol > 0 && inner_iters >= 1,
            "tv config: lambda, iters and tol must be positive");
  }
};

struct ReconstructedImage {
  Matrix pixels;  // clipped to [0,1]
  std::vector<double> objective_trace;
  int iters_used = 0;
  bool converged = false;
};

/// Approximately minimizes 0.5*||A x - s||^2 + lambda*TV(x) on the
/// row-normalized system via monotone FISTA with an FGP prox. The objective
/// trace is non-increasing by construction; non-convergence returns the best
/// iterate with converged=false.
ReconstructedImage tv_reconstruct(const MeasurementVector& m, const PatternBank& bank,
                                  const TvConfig& cfg);

/// Objective of the solver's (row-normalized) system; matches the trace.
double tv_objective(const Matrix& image, const MeasurementVector& m, const PatternBank& bank,
                    const TvConfig& cfg);

/// Gradient of the smooth data term of that system (finite-difference oracle
/// hook).
Matrix tv_data_gradient(const Matrix& image, const MeasurementVector& m, const PatternBank& bank);

double tv_value(const Matrix& image, TvConfig::Kind kind);

// --- learned reconstructor (DL-Rec) ----------------------------------------

struct DlRecConfig {
  int epochs = 30;
  double lr0 = 1e-3;
  double decay = 0.8;
  int decay_every = 20;
  int batch_size = 32;
  double weight_decay = 1e-4;
  std::uint64_t seed = 7;
  int refine_channels = 16;
};

/// Minimal measurement-to-image network: affine N->HW, reshape, three 3x3
/// refinement convolutions (a stand-in for the cited learned reconstructor).
class DlRec {
public:
  DlRec(int n_measurements, int side, const DlRecConfig& cfg);

  std::vector<double> train(const std::vector<MatrixF>& scenes, const PatternBank& bank);
  ReconstructedImage reconstruct(const MeasurementVector& m) const;

  int n_measurements() const { return n_meas_; }
  int side() const { return side_; }
  nn::ParamStore<float>& param_store() { return params_; }

private:
  nn::Mat<float> forward(const nn::Mat<float>& meas, nn::Workspace<float>& ws,
                         std::vector<nn::Mat<float>>* acts) const;

  DlRecConfig cfg_;
  int n_meas_;
  int side_;
  nn::ParamStore<float> params_;
  nn::Dense<float> fc_;
  std::vector<nn::Conv2d<float>> convs_;
  int norm_mean_ = -1;
  int norm_std_ = -1;
  friend struct DlRecTrainer;
};

// --- clean-image segmenter ---------------------------------------------------

struct SegmenterConfig {
  int epochs = 60;
  double lr0 = 1e-3;
  double decay = 0.8;
  int decay_every = 30;
  int batch_size = 32;
  double weight_decay = 1e-4;
  std::uint64_t seed = 11;
  int base = 32;
};

/// Image-input segmentation network: 3x3 stem plus the same nested-skip head
/// as the image-free decoder; trained on clean images, applied to
/// reconstructions.
class ImageSegmenter {
public:
  ImageSegmenter(int side, int n_classes, const SegmenterConfig& cfg);

  std::vector<double> train(const std::vector<LabeledSample>& samples);
  LabelMap predict(const MatrixF& scene) const;
  LabelMap predict(const Matrix& scene) const;

  int n_classes() const { return n_classes_; }
  nn::ParamStore<float>& param_store() { return params_; }

private:
  nn::Mat<float> forward(const nn::Mat<float>& img, nn::Workspace<float>& ws,
                         nn::Mat<float>* stem_out,
                         typename nn::UnetPPHead<float>::Acts* acts) const;

  SegmenterConfig cfg_;
  int side_;
  int n_classes_;
  nn::ParamStore<float> params_;
  nn::Conv2d<float> stem_;
  nn::UnetPPHead<float> head_;
  friend struct SegmenterTrainer;
};

enum class BaselineMethod { tvrec, dlrec };

BaselineMethod baseline_method_from_string(const std::string& s);

/// simulate -> reconstruct -> segment -> score over a test set.
MetricRow run_baseline_pipeline(const std::vector<LabeledSample>& test, const PatternBank& bank,
                                BaselineMethod method, const TvConfig& tv_cfg,
                                const DlRec* dlrec, const ImageSegmenter& segmenter,
                                const NoiseModel& noise = {});

}  // namespace spixseg
