#pragma once

#include <cmath>
#include <vector>

#include "spixseg/nn/layers.hpp"
#include "spixseg/nn/model.hpp"

namespace spixseg::nn {

/// Adam with classic L2 weight decay (added to the gradient); decay skips
/// biases and rectifier slopes. Update order follows registration order, so
/// steps are deterministic.
template <typename T>
class Adam {
public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
  };

  Adam() = default;
  Adam(const ParamStore<T>& ps, Options opt) : opt_(opt) {
    m_.reserve(ps.entries().size());
    v_.reserve(ps.entries().size());
    for (const auto& e : ps.entries()) {
      m_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
      v_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
    }
  }

  /// One update over the tensors inside `scope` using accumulated grads.
  void step(ParamStore<T>& ps, const GradBuf<T>& g, double lr, TrainScope scope) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
    const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
    const T b1 = static_cast<T>(opt_.beta1);
    const T b2 = static_cast<T>(opt_.beta2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto& e = ps.entries()[i];
      if (!scope_includes(scope, e.group)) continue;
      Mat<T> grad = g[i];
      if (!e.no_decay && opt_.weight_decay > 0.0) {
        grad += static_cast<T>(opt_.weight_decay) * e.value;
      }
      m_[i] = b1 * m_[i] + (T(1) - b1) * grad;
      v_[i] = b2 * v_[i] + (T(1) - b2) * grad.cwiseProduct(grad);
      const T step_size = static_cast<T>(lr / bc1);
      const T denom_scale = static_cast<T>(1.0 / std::sqrt(bc2));
      e.value.array() -=
          step_size * m_[i].array() /
          (v_[i].array().sqrt() * denom_scale + static_cast<T>(opt_.eps));
    }
  }

  long t() const { return t_; }
  const Options& options() const { return opt_; }

  // Serialized state (checkpoint resume).
  std::vector<Mat<T>>& moments1() { return m_; }
  std::vector<Mat<T>>& moments2() { return v_; }
  void set_t(long t) { t_ = t; }

private:
  Options opt_;
  std::vector<Mat<T>> m_;
  std::vector<Mat<T>> v_;
  long t_ = 0;
};

}  // namespace spixseg::nn
