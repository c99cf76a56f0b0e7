#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "spixseg/common.hpp"

namespace spixseg::nn {

// Feature maps are (channels x pixels) matrices, pixel j = y*W + x, so each
// column holds one pixel across channels. Column-major storage keeps a pixel's
// channels contiguous, which im2col exploits with block copies.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

enum class ParamGroup { encoder, expand, fsrcnn, head };

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::expand: return "expand";
    case ParamGroup::fsrcnn: return "fsrcnn";
    case ParamGroup::head: return "head";
  }
  return "?";
}

enum class InitKind { he_normal, zero, prelu_slope };

/// Central registry of trainable tensors. Layers hold indices into the store;
/// gradients live in a parallel vector of identically shaped matrices.
template <typename T>
class ParamStore {
public:
  struct Entry {
    std::string name;
    ParamGroup group;
    bool no_decay;
    InitKind init;
    int fan_in;
    Mat<T> value;
  };

  int add(std::string name, ParamGroup group, bool no_decay, InitKind init, int fan_in, int rows,
          int cols) {
    entries_.push_back({std::move(name), group, no_decay, init, fan_in, Mat<T>::Zero(rows, cols)});
    return static_cast<int>(entries_.size()) - 1;
  }

  Mat<T>& operator[](int i) { return entries_[static_cast<std::size_t>(i)].value; }
  const Mat<T>& operator[](int i) const { return entries_[static_cast<std::size_t>(i)].value; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }

  std::vector<Mat<T>> zero_grads() const {
    std::vector<Mat<T>> g;
    g.reserve(entries_.size());
    for (const auto& e : entries_) g.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
    return g;
  }

private:
  std::vector<Entry> entries_;
};

template <typename T>
using GradBuf = std::vector<Mat<T>>;

template <typename T>
void reset_grads(GradBuf<T>& g) {
  for (auto& m : g) m.setZero();
}

template <typename T>
void accumulate_grads(GradBuf<T>& dst, const GradBuf<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

/// Per-worker scratch for im2col buffers.
template <typename T>
struct Workspace {
  Mat<T> cols;
  Mat<T> cols2;
};

/// Full-frame measurement layer: one filter per measurement, no bias
/// (the learned sensing matrix). Input is the flattened scene (HW x 1).
template <typename T>
class EncoderLinear {
public:
  EncoderLinear() = default;
  EncoderLinear(ParamStore<T>& ps, const std::string& name, int n_meas, int pixels)
      : n_(n_meas), pixels_(pixels) {
    W_ = ps.add(name + ".W", ParamGroup::encoder, false, InitKind::he_normal, pixels, n_meas,
                pixels);
  }

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& x) const { return ps[W_] * x; }

  void backward(const ParamStore<T>& ps, const Mat<T>& x, const Mat<T>& gy, GradBuf<T>& g,
                bool train_weights) const {
    (void)ps;
    if (train_weights) g[static_cast<std::size_t>(W_)].noalias() += gy * x.transpose();
  }

  int weight_index() const { return W_; }
  int n_measurements() const { return n_; }
  int pixels() const { return pixels_; }

private:
  int W_ = -1;
  int n_ = 0;
  int pixels_ = 0;
};

/// Affine map on column vectors.
template <typename T>
class Dense {
public:
  Dense() = default;
  Dense(ParamStore<T>& ps, const std::string& name, ParamGroup group, int in, int out) {
    W_ = ps.add(name + ".W", group, false, InitKind::he_normal, in, out, in);
    b_ = ps.add(name + ".b", group, true, InitKind::zero, 0, out, 1);
  }

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& x) const {
    Mat<T> y = ps[W_] * x;
    y.col(0) += ps[b_].col(0);
    return y;
  }

  Mat<T> backward(const ParamStore<T>& ps, const Mat<T>& x, const Mat<T>& gy, GradBuf<T>& g) const {
    g[static_cast<std::size_t>(W_)].noalias() += gy * x.transpose();
    g[static_cast<std::size_t>(b_)].col(0) += gy.col(0);
    return ps[W_].transpose() * gy;
  }

private:
  int W_ = -1, b_ = -1;
};

/// Stride-1 convolution with same padding, im2col + GEMM.
template <typename T>
class Conv2d {
public:
  Conv2d() = default;
  Conv2d(ParamStore<T>& ps, const std::string& name, ParamGroup group, int in_ch, int out_ch,
         int k)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), pad_((k - 1) / 2) {
    W_ = ps.add(name + ".W", group, false, InitKind::he_normal, in_ch * k * k, out_ch,
                in_ch * k * k);
    b_ = ps.add(name + ".b", group, true, InitKind::zero, 0, out_ch, 1);
  }

  void im2col(const Mat<T>& x, int h, int w, Mat<T>& cols) const {
    cols.resize(static_cast<Eigen::Index>(in_ch_) * k_ * k_, static_cast<Eigen::Index>(h) * w);
    cols.setZero();
    for (int dy = 0; dy < k_; ++dy) {
      for (int dx = 0; dx < k_; ++dx) {
        const int t = dy * k_ + dx;
        const int ys = std::max(0, pad_ - dy);
        const int ye = std::min(h, h + pad_ - dy);
        const int xs = std::max(0, pad_ - dx);
        const int xe = std::min(w, w + pad_ - dx);
        if (xe <= xs) continue;
        for (int y = ys; y < ye; ++y) {
          const int src = (y + dy - pad_) * w + (xs + dx - pad_);
          cols.block(static_cast<Eigen::Index>(t) * in_ch_, static_cast<Eigen::Index>(y) * w + xs,
                     in_ch_, xe - xs) = x.block(0, src, in_ch_, xe - xs);
        }
      }
    }
  }

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& x, int h, int w, Workspace<T>& ws) const {
    require_shape(x.rows() == in_ch_ && x.cols() == static_cast<Eigen::Index>(h) * w,
                  "conv2d: bad input shape");
    im2col(x, h, w, ws.cols);
    Mat<T> y = ps[W_] * ws.cols;
    y.colwise() += ps[b_].col(0);
    return y;
  }

  Mat<T> backward(const ParamStore<T>& ps, const Mat<T>& x, int h, int w, const Mat<T>& gy,
                  GradBuf<T>& g, Workspace<T>& ws, bool need_gx = true) const {
    g[static_cast<std::size_t>(b_)].col(0) += gy.rowwise().sum();
    im2col(x, h, w, ws.cols);
    g[static_cast<std::size_t>(W_)].noalias() += gy * ws.cols.transpose();
    if (!need_gx) return Mat<T>();
    ws.cols2.resize(ws.cols.rows(), ws.cols.cols());
    ws.cols2.noalias() = ps[W_].transpose() * gy;
    Mat<T> gx = Mat<T>::Zero(in_ch_, static_cast<Eigen::Index>(h) * w);
    for (int dy = 0; dy < k_; ++dy) {
      for (int dx = 0; dx < k_; ++dx) {
        const int t = dy * k_ + dx;
        const int ys = std::max(0, pad_ - dy);
        const int ye = std::min(h, h + pad_ - dy);
        const int xs = std::max(0, pad_ - dx);
        const int xe = std::min(w, w + pad_ - dx);
        if (xe <= xs) continue;
        for (int y = ys; y < ye; ++y) {
          const int dst = (y + dy - pad_) * w + (xs + dx - pad_);
          gx.block(0, dst, in_ch_, xe - xs) +=
              ws.cols2.block(static_cast<Eigen::Index>(t) * in_ch_,
                             static_cast<Eigen::Index>(y) * w + xs, in_ch_, xe - xs);
        }
      }
    }
    return gx;
  }

  int out_ch() const { return out_ch_; }

private:
  int W_ = -1, b_ = -1;
  int in_ch_ = 0, out_ch_ = 0, k_ = 0, pad_ = 0;
};

/// Transposed convolution (upsampling). Output size (h-1)*s - 2p + k + q.
template <typename T>
class ConvTranspose2d {
public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParamStore<T>& ps, const std::string& name, ParamGroup group, int in_ch,
                  int out_ch, int k, int stride, int pad, int out_pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), out_pad_(out_pad) {
    W_ = ps.add(name + ".W", group, false, InitKind::he_normal, in_ch * k * k, in_ch,
                static_cast<Eigen::Index>(out_ch) * k * k);
    b_ = ps.add(name + ".b", group, true, InitKind::zero, 0, out_ch, 1);
  }

  int out_dim(int in_dim) const { return (in_dim - 1) * stride_ - 2 * pad_ + k_ + out_pad_; }

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& x, int h, int w, Workspace<T>& ws) const {
    require_shape(x.rows() == in_ch_ && x.cols() == static_cast<Eigen::Index>(h) * w,
                  "conv_transpose2d: bad input shape");
    const int oh = out_dim(h), ow = out_dim(w);
    ws.cols.resize(static_cast<Eigen::Index>(out_ch_) * k_ * k_, x.cols());
    ws.cols.noalias() = ps[W_].transpose() * x;
    Mat<T> y = Mat<T>::Zero(out_ch_, static_cast<Eigen::Index>(oh) * ow);
    for (int dy = 0; dy < k_; ++dy) {
      for (int dx = 0; dx < k_; ++dx) {
        const int t = dy * k_ + dx;
        for (int iy = 0; iy < h; ++iy) {
          const int oy = iy * stride_ - pad_ + dy;
          if (oy < 0 || oy >= oh) continue;
          for (int ix = 0; ix < w; ++ix) {
            const int ox = ix * stride_ - pad_ + dx;
            if (ox < 0 || ox >= ow) continue;
            y.col(static_cast<Eigen::Index>(oy) * ow + ox) +=
                ws.cols.block(static_cast<Eigen::Index>(t) * out_ch_,
                              static_cast<Eigen::Index>(iy) * w + ix, out_ch_, 1);
          }
        }
      }
    }
    y.colwise() += ps[b_].col(0);
    return y;
  }

  Mat<T> backward(const ParamStore<T>& ps, const Mat<T>& x, int h, int w, const Mat<T>& gy,
                  GradBuf<T>& g, Workspace<T>& ws, bool need_gx = true) const {
    const int oh = out_dim(h), ow = out_dim(w);
    g[static_cast<std::size_t>(b_)].col(0) += gy.rowwise().sum();
    // Gather: gcols mirrors the forward scatter.
    ws.cols.resize(static_cast<Eigen::Index>(out_ch_) * k_ * k_, x.cols());
    ws.cols.setZero();
    for (int dy = 0; dy < k_; ++dy) {
      for (int dx = 0; dx < k_; ++dx) {
        const int t = dy * k_ + dx;
        for (int iy = 0; iy < h; ++iy) {
          const int oy = iy * stride_ - pad_ + dy;
          if (oy < 0 || oy >= oh) continue;
          for (int ix = 0; ix < w; ++ix) {
            const int ox = ix * stride_ - pad_ + dx;
            if (ox < 0 || ox >= ow) continue;
            ws.cols.block(static_cast<Eigen::Index>(t) * out_ch_,
                          static_cast<Eigen::Index>(iy) * w + ix, out_ch_, 1) =
                gy.col(static_cast<Eigen::Index>(oy) * ow + ox);
          }
        }
      }
    }
    g[static_cast<std::size_t>(W_)].noalias() += x * ws.cols.transpose();
    if (!need_gx) return Mat<T>();
    return ps[W_] * ws.cols;
  }

private:
  int W_ = -1, b_ = -1;
  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0, out_pad_ = 0;
};

/// Parametric rectifier with one slope per channel.
template <typename T>
class PReLU {
public:
  PReLU() = default;
  PReLU(ParamStore<T>& ps, const std::string& name, ParamGroup group, int channels)
      : channels_(channels) {
    a_ = ps.add(name + ".alpha", group, true, InitKind::prelu_slope, 0, channels, 1);
  }

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& x) const {
    Mat<T> y(x.rows(), x.cols());
    for (int c = 0; c < channels_; ++c) {
      const T a = ps[a_](c, 0);
      y.row(c) = x.row(c).cwiseMax(T(0)) + a * x.row(c).cwiseMin(T(0));
    }
    return y;
  }

  Mat<T> backward(const ParamStore<T>& ps, const Mat<T>& x, const Mat<T>& gy, GradBuf<T>& g) const {
    Mat<T> gx(x.rows(), x.cols());
    auto& ga = g[static_cast<std::size_t>(a_)];
    for (int c = 0; c < channels_; ++c) {
      const T a = ps[a_](c, 0);
      ga(c, 0) += x.row(c).cwiseMin(T(0)).dot(gy.row(c));
      gx.row(c) =
          gy.row(c).cwiseProduct((x.row(c).array() > T(0)).template cast<T>().matrix() +
                                 a * (x.row(c).array() <= T(0)).template cast<T>().matrix());
    }
    return gx;
  }

private:
  int a_ = -1;
  int channels_ = 0;
};

template <typename T>
Mat<T> relu(const Mat<T>& x) {
  return x.cwiseMax(T(0));
}

template <typename T>
Mat<T> relu_backward(const Mat<T>& x, const Mat<T>& gy) {
  return gy.cwiseProduct((x.array() > T(0)).template cast<T>().matrix());
}

/// 2x2 max pool, stride 2. Ties resolve to the first maximal position in
/// raster order (deterministic backward).
template <typename T>
Mat<T> maxpool2(const Mat<T>& x, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  Mat<T> y(x.rows(), static_cast<Eigen::Index>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index j0 = static_cast<Eigen::Index>(2 * oy) * w + 2 * ox;
      y.col(static_cast<Eigen::Index>(oy) * ow + ox) = x.col(j0)
                                                            .cwiseMax(x.col(j0 + 1))
                                                            .cwiseMax(x.col(j0 + w))
                                                            .cwiseMax(x.col(j0 + w + 1));
    }
  }
  return y;
}

template <typename T>
Mat<T> maxpool2_backward(const Mat<T>& x, int h, int w, const Mat<T>& gy) {
  const int oh = h / 2, ow = w / 2;
  Mat<T> gx = Mat<T>::Zero(x.rows(), x.cols());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index j0 = static_cast<Eigen::Index>(2 * oy) * w + 2 * ox;
      const Eigen::Index jo = static_cast<Eigen::Index>(oy) * ow + ox;
      const Eigen::Index cand[4] = {j0, j0 + 1, j0 + w, j0 + w + 1};
      for (Eigen::Index c = 0; c < x.rows(); ++c) {
        Eigen::Index best = cand[0];
        for (int t = 1; t < 4; ++t) {
          if (x(c, cand[t]) > x(c, best)) best = cand[t];
        }
        gx(c, best) += gy(c, jo);
      }
    }
  }
  return gx;
}

/// Channel concatenation (stack rows).
template <typename T>
Mat<T> cat_channels(const std::vector<const Mat<T>*>& xs) {
  Eigen::Index rows = 0;
  for (const auto* x : xs) rows += x->rows();
  Mat<T> y(rows, xs.front()->cols());
  Eigen::Index r = 0;
  for (const auto* x : xs) {
    y.middleRows(r, x->rows()) = *x;
    r += x->rows();
  }
  return y;
}

}  // namespace spixseg::nn
