#pragma once

#include <string>
#include <vector>

#include "spixseg/common.hpp"
#include "spixseg/nn/layers.hpp"

namespace spixseg::nn {

struct FsrcnnSpec {
  int d = 56;  // feature channels
  int s = 12;  // shrink channels
  int m = 4;   // mapping conv count
  int k_extract = 5;
  int k_shrink = 1;
  int k_map = 3;
  int k_expand = 1;
  int k_deconv = 9;
};

struct HeadSpec {
  int levels = 2;  // downsampling levels (fixed wiring below)
  int base = 32;   // channels at full resolution
};

struct NetworkConfig {
  int n_measurements = 40;
  int scene_h = 64;
  int scene_w = 64;
  int n_classes = 3;
  FsrcnnSpec fsrcnn;
  HeadSpec head;
  std::vector<std::string> class_names = {"background", "cytoplasm", "nucleus"};

  int pixels() const { return scene_h * scene_w; }
  int feat_h() const { return scene_h / 2; }
  int feat_w() const { return scene_w / 2; }
  int fc_width() const { return feat_h() * feat_w(); }

  void validate() const {
    require(n_measurements >= 1, "network config: n_measurements must be >= 1");
    require(scene_h == scene_w, "network config: scenes must be square");
    require(scene_h >= 8 && scene_h % 4 == 0, "network config: scene side must be >= 8 and divisible by 4");
    require(n_classes >= 2, "network config: need at least two classes");
    require(head.levels == 2, "network config: segmentation head is wired for 2 levels");
    require(fsrcnn.d >= 1 && fsrcnn.s >= 1 && fsrcnn.m >= 1, "network config: bad fsrcnn widths");
    require(static_cast<int>(class_names.size()) == n_classes,
            "network config: class_names must have n_classes entries");
  }
};

/// FSRCNN-style block: extract -> shrink -> m x map -> expand -> deconv x2.
/// Input 1 x (feat_h*feat_w), output 1 x (scene pixels).
template <typename T>
class Fsrcnn {
public:
  Fsrcnn() = default;
  Fsrcnn(ParamStore<T>& ps, const FsrcnnSpec& spec) : spec_(spec) {
    extract_ = Conv2d<T>(ps, "fsrcnn.extract", ParamGroup::fsrcnn, 1, spec.d, spec.k_extract);
    act_extract_ = PReLU<T>(ps, "fsrcnn.extract", ParamGroup::fsrcnn, spec.d);
    shrink_ = Conv2d<T>(ps, "fsrcnn.shrink", ParamGroup::fsrcnn, spec.d, spec.s, spec.k_shrink);
    act_shrink_ = PReLU<T>(ps, "fsrcnn.shrink", ParamGroup::fsrcnn, spec.s);
    for (int i = 0; i < spec.m; ++i) {
      const std::string name = "fsrcnn.map" + std::to_string(i);
      map_.emplace_back(ps, name, ParamGroup::fsrcnn, spec.s, spec.s, spec.k_map);
      act_map_.emplace_back(ps, name, ParamGroup::fsrcnn, spec.s);
    }
    expand_ = Conv2d<T>(ps, "fsrcnn.expand", ParamGroup::fsrcnn, spec.s, spec.d, spec.k_expand);
    act_expand_ = PReLU<T>(ps, "fsrcnn.expand", ParamGroup::fsrcnn, spec.d);
    const int pad = (spec.k_deconv - 1) / 2;
    deconv_ = ConvTranspose2d<T>(ps, "fsrcnn.deconv", ParamGroup::fsrcnn, spec.d, 1, spec.k_deconv,
                                 2, pad, 1);
  }

  struct Acts {
    Mat<T> in;                    // 1 x fh*fw
    Mat<T> z_ex, a_ex;            // d x fh*fw
    Mat<T> z_sh, a_sh;            // s x fh*fw
    std::vector<Mat<T>> z_map, a_map;
    Mat<T> z_exp, a_exp;          // d x fh*fw
    Mat<T> out;                   // 1 x (2fh * 2fw)
  };

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& in, int fh, int fw, Acts& a,
                 Workspace<T>& ws) const {
    a.in = in;
    a.z_ex = extract_.forward(ps, in, fh, fw, ws);
    a.a_ex = act_extract_.forward(ps, a.z_ex);
    a.z_sh = shrink_.forward(ps, a.a_ex, fh, fw, ws);
    a.a_sh = act_shrink_.forward(ps, a.z_sh);
    a.z_map.resize(map_.size());
    a.a_map.resize(map_.size());
    const Mat<T>* cur = &a.a_sh;
    for (std::size_t i = 0; i < map_.size(); ++i) {
      a.z_map[i] = map_[i].forward(ps, *cur, fh, fw, ws);
      a.a_map[i] = act_map_[i].forward(ps, a.z_map[i]);
      cur = &a.a_map[i];
    }
    a.z_exp = expand_.forward(ps, *cur, fh, fw, ws);
    a.a_exp = act_expand_.forward(ps, a.z_exp);
    a.out = deconv_.forward(ps, a.a_exp, fh, fw, ws);
    return a.out;
  }

  /// Returns the gradient wrt the block input.
  Mat<T> backward(const ParamStore<T>& ps, const Acts& a, int fh, int fw, const Mat<T>& gout,
                  GradBuf<T>& g, Workspace<T>& ws, bool need_gin = true) const {
    Mat<T> gd = deconv_.backward(ps, a.a_exp, fh, fw, gout, g, ws);
    gd = act_expand_.backward(ps, a.z_exp, gd, g);
    const Mat<T>& exp_in = map_.empty() ? a.a_sh : a.a_map.back();
    gd = expand_.backward(ps, exp_in, fh, fw, gd, g, ws);
    for (int i = static_cast<int>(map_.size()) - 1; i >= 0; --i) {
      gd = act_map_[static_cast<std::size_t>(i)].backward(ps, a.z_map[static_cast<std::size_t>(i)],
                                                          gd, g);
      const Mat<T>& in_i = i == 0 ? a.a_sh : a.a_map[static_cast<std::size_t>(i - 1)];
      gd = map_[static_cast<std::size_t>(i)].backward(ps, in_i, fh, fw, gd, g, ws);
    }
    gd = act_shrink_.backward(ps, a.z_sh, gd, g);
    gd = shrink_.backward(ps, a.a_ex, fh, fw, gd, g, ws);
    gd = act_extract_.backward(ps, a.z_ex, gd, g);
    return extract_.backward(ps, a.in, fh, fw, gd, g, ws, need_gin);
  }

private:
  FsrcnnSpec spec_;
  Conv2d<T> extract_, shrink_, expand_;
  std::vector<Conv2d<T>> map_;
  PReLU<T> act_extract_, act_shrink_, act_expand_;
  std::vector<PReLU<T>> act_map_;
  ConvTranspose2d<T> deconv_;
};

/// UNet++-style segmentation head with two downsampling levels and dense
/// nested skips:
///   x00 ── x01 ── x02 ─ 1x1 ─ logits
///    │   ╱  │    ╱
///   x10 ── x11
///    │    ╱
///   x20
/// Upsampling uses 2x2 transposed convolutions; every node is conv3x3+ReLU.
template <typename T>
class UnetPPHead {
public:
  UnetPPHead() = default;
  UnetPPHead(ParamStore<T>& ps, const std::string& prefix, int in_ch, int base, int n_classes)
      : base_(base) {
    conv00_ = Conv2d<T>(ps, prefix + ".x00", ParamGroup::head, in_ch, base, 3);
    conv10_ = Conv2d<T>(ps, prefix + ".x10", ParamGroup::head, base, 2 * base, 3);
    conv20_ = Conv2d<T>(ps, prefix + ".x20", ParamGroup::head, 2 * base, 4 * base, 3);
    up10_ = ConvTranspose2d<T>(ps, prefix + ".up10", ParamGroup::head, 2 * base, base, 2, 2, 0, 0);
    conv01_ = Conv2d<T>(ps, prefix + ".x01", ParamGroup::head, 2 * base, base, 3);
    up20_ = ConvTranspose2d<T>(ps, prefix + ".up20", ParamGroup::head, 4 * base, 2 * base, 2, 2, 0, 0);
    conv11_ = Conv2d<T>(ps, prefix + ".x11", ParamGroup::head, 4 * base, 2 * base, 3);
    up11_ = ConvTranspose2d<T>(ps, prefix + ".up11", ParamGroup::head, 2 * base, base, 2, 2, 0, 0);
    conv02_ = Conv2d<T>(ps, prefix + ".x02", ParamGroup::head, 3 * base, base, 3);
    out_ = Conv2d<T>(ps, prefix + ".out", ParamGroup::head, base, n_classes, 1);
  }

  struct Acts {
    Mat<T> in;
    Mat<T> z00, x00, p0;
    Mat<T> z10, x10, p1;
    Mat<T> z20, x20;
    Mat<T> u10, c01, z01, x01;
    Mat<T> u20, c11, z11, x11;
    Mat<T> u11, c02, z02, x02;
    Mat<T> logits;
  };

  Mat<T> forward(const ParamStore<T>& ps, const Mat<T>& in, int h, int w, Acts& a,
                 Workspace<T>& ws) const {
    const int h1 = h / 2, w1 = w / 2, h2 = h / 4, w2 = w / 4;
    a.in = in;
    a.z00 = conv00_.forward(ps, in, h, w, ws);
    a.x00 = relu(a.z00);
    a.p0 = maxpool2(a.x00, h, w);
    a.z10 = conv10_.forward(ps, a.p0, h1, w1, ws);
    a.x10 = relu(a.z10);
    a.p1 = maxpool2(a.x10, h1, w1);
    a.z20 = conv20_.forward(ps, a.p1, h2, w2, ws);
    a.x20 = relu(a.z20);

    a.u10 = up10_.forward(ps, a.x10, h1, w1, ws);
    a.c01 = cat_channels<T>({&a.x00, &a.u10});
    a.z01 = conv01_.forward(ps, a.c01, h, w, ws);
    a.x01 = relu(a.z01);

    a.u20 = up20_.forward(ps, a.x20, h2, w2, ws);
    a.c11 = cat_channels<T>({&a.x10, &a.u20});
    a.z11 = conv11_.forward(ps, a.c11, h1, w1, ws);
    a.x11 = relu(a.z11);

    a.u11 = up11_.forward(ps, a.x11, h1, w1, ws);
    a.c02 = cat_channels<T>({&a.x00, &a.x01, &a.u11});
    a.z02 = conv02_.forward(ps, a.c02, h, w, ws);
    a.x02 = relu(a.z02);

    a.logits = out_.forward(ps, a.x02, h, w, ws);
    return a.logits;
  }

  Mat<T> backward(const ParamStore<T>& ps, const Acts& a, int h, int w, const Mat<T>& glogits,
                  GradBuf<T>& g, Workspace<T>& ws, bool need_gin = true) const {
    const int h1 = h / 2, w1 = w / 2, h2 = h / 4, w2 = w / 4;
    const int b = base_;

    Mat<T> gx02 = out_.backward(ps, a.x02, h, w, glogits, g, ws);
    Mat<T> gz02 = relu_backward(a.z02, gx02);
    Mat<T> gc02 = conv02_.backward(ps, a.c02, h, w, gz02, g, ws);
    Mat<T> gx00 = gc02.middleRows(0, b);
    Mat<T> gx01 = gc02.middleRows(b, b);
    Mat<T> gu11 = gc02.middleRows(2 * b, b);

    Mat<T> gx11 = up11_.backward(ps, a.x11, h1, w1, gu11, g, ws);
    Mat<T> gz11 = relu_backward(a.z11, gx11);
    Mat<T> gc11 = conv11_.backward(ps, a.c11, h1, w1, gz11, g, ws);
    Mat<T> gx10 = gc11.middleRows(0, 2 * b);
    Mat<T> gu20 = gc11.middleRows(2 * b, 2 * b);

    Mat<T> gx20 = up20_.backward(ps, a.x20, h2, w2, gu20, g, ws);

    Mat<T> gz01 = relu_backward(a.z01, gx01);
    Mat<T> gc01 = conv01_.backward(ps, a.c01, h, w, gz01, g, ws);
    gx00 += gc01.middleRows(0, b);
    Mat<T> gu10 = gc01.middleRows(b, b);
    gx10 += up10_.backward(ps, a.x10, h1, w1, gu10, g, ws);

    Mat<T> gz20 = relu_backward(a.z20, gx20);
    Mat<T> gp1 = conv20_.backward(ps, a.p1, h2, w2, gz20, g, ws);
    gx10 += maxpool2_backward(a.x10, h1, w1, gp1);

    Mat<T> gz10 = relu_backward(a.z10, gx10);
    Mat<T> gp0 = conv10_.backward(ps, a.p0, h1, w1, gz10, g, ws);
    gx00 += maxpool2_backward(a.x00, h, w, gp0);

    Mat<T> gz00 = relu_backward(a.z00, gx00);
    return conv00_.backward(ps, a.in, h, w, gz00, g, ws, need_gin);
  }

private:
  int base_ = 0;
  Conv2d<T> conv00_, conv10_, conv20_, conv01_, conv11_, conv02_, out_;
  ConvTranspose2d<T> up10_, up20_, up11_;
};

enum class TrainScope {
  stage1,        // encoder + expand + fsrcnn (head untouched)
  stage1_fixed,  // expand + fsrcnn (frozen modulation)
  full,          // everything
  decoder_only,  // expand + fsrcnn + head (frozen modulation)
};

inline bool scope_includes(TrainScope s, ParamGroup g) {
  switch (s) {
    case TrainScope::stage1:
      return g != ParamGroup::head;
    case TrainScope::stage1_fixed:
      return g == ParamGroup::expand || g == ParamGroup::fsrcnn;
    case TrainScope::full:
      return true;
    case TrainScope::decoder_only:
      return g != ParamGroup::encoder;
  }
  return false;
}

/// End-to-end image-free segmentation network.
template <typename T>
class SegNet {
public:
  explicit SegNet(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    enc_ = EncoderLinear<T>(params_, "encoder", cfg.n_measurements, cfg.pixels());
    expand_ = Dense<T>(params_, "expand", ParamGroup::expand, cfg.n_measurements, cfg.fc_width());
    fsrcnn_ = Fsrcnn<T>(params_, cfg.fsrcnn);
    head_ = UnetPPHead<T>(params_, "head", 1, cfg.head.base, cfg.n_classes);
  }

  const NetworkConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  struct Acts {
    Mat<T> scene;  // pixels x 1
    Mat<T> meas;   // N x 1
    Mat<T> fc;     // fc_width x 1
    Mat<T> fin;    // 1 x fc_width (feature map form)
    typename Fsrcnn<T>::Acts fs;
    typename UnetPPHead<T>::Acts hd;
  };

  /// Eq.-1 measurement path; scene_flat is pixels x 1.
  Mat<T> encode(const Mat<T>& scene_flat) const {
    require_shape(scene_flat.rows() == cfg_.pixels() && scene_flat.cols() == 1,
                  "encode: scene size does not match configuration");
    return enc_.forward(params_, scene_flat);
  }

  /// Measurements -> 1 x pixels feature map (the stage-1 output).
  Mat<T> decode_features(const Mat<T>& meas, Acts& a, Workspace<T>& ws) const {
    require_shape(meas.rows() == cfg_.n_measurements && meas.cols() == 1,
                  "decode: measurement length does not match configuration");
    a.meas = meas;
    a.fc = expand_.forward(params_, meas);
    a.fin = a.fc.transpose();
    return fsrcnn_.forward(params_, a.fin, cfg_.feat_h(), cfg_.feat_w(), a.fs, ws);
  }

  /// Feature map -> class scores (n_classes x pixels).
  Mat<T> decode_segment(const Mat<T>& feat, Acts& a, Workspace<T>& ws) const {
    return head_.forward(params_, feat, cfg_.scene_h, cfg_.scene_w, a.hd, ws);
  }

  Mat<T> forward(const Mat<T>& scene_flat, Acts& a, Workspace<T>& ws) const {
    a.scene = scene_flat;
    Mat<T> feat = decode_features(encode(scene_flat), a, ws);
    return decode_segment(feat, a, ws);
  }

  Mat<T> infer_logits(const Mat<T>& meas, Acts& a, Workspace<T>& ws) const {
    Mat<T> feat = decode_features(meas, a, ws);
    return decode_segment(feat, a, ws);
  }

  /// Argmax labels, ties broken toward the lowest class index.
  LabelMap labels_from_logits(const Mat<T>& logits) const {
    LabelMap out(cfg_.scene_h, cfg_.scene_w);
    for (int y = 0; y < cfg_.scene_h; ++y) {
      for (int x = 0; x < cfg_.scene_w; ++x) {
        const Eigen::Index j = static_cast<Eigen::Index>(y) * cfg_.scene_w + x;
        int best = 0;
        for (int c = 1; c < cfg_.n_classes; ++c) {
          if (logits(c, j) > logits(best, j)) best = c;
        }
        out(y, x) = static_cast<std::uint8_t>(best);
      }
    }
    return out;
  }

  LabelMap infer_from_measurements(const Mat<T>& meas, Workspace<T>& ws) const {
    Acts a;
    return labels_from_logits(infer_logits(meas, a, ws));
  }

  /// Backward of the stage-2 loss given dL/dlogits. Gradients accumulate
  /// into g; encoder weights only when the scope trains them.
  void backward_from_logits(const Acts& a, const Mat<T>& glogits, TrainScope scope, GradBuf<T>& g,
                            Workspace<T>& ws) const {
    Mat<T> gfeat = head_.backward(params_, a.hd, cfg_.scene_h, cfg_.scene_w, glogits, g, ws);
    backward_from_features(a, gfeat, scope, g, ws);
  }

  /// Backward of the stage-1 loss given dL/dfeature_map (1 x pixels).
  void backward_from_features(const Acts& a, const Mat<T>& gfeat, TrainScope scope, GradBuf<T>& g,
                              Workspace<T>& ws) const {
    const bool train_enc = scope_includes(scope, ParamGroup::encoder);
    Mat<T> gfin = fsrcnn_.backward(params_, a.fs, cfg_.feat_h(), cfg_.feat_w(), gfeat, g, ws);
    Mat<T> gfc = gfin.transpose();
    Mat<T> gmeas = expand_.backward(params_, a.meas, gfc, g);
    enc_.backward(params_, a.scene, gmeas, g, train_enc);
  }

  /// Scene -> stage-1 feature map, skipping the segmentation head.
  Mat<T> forward_features(const Mat<T>& scene_flat, Acts& a, Workspace<T>& ws) const {
    a.scene = scene_flat;
    return decode_features(encode(scene_flat), a, ws);
  }

  const EncoderLinear<T>& encoder() const { return enc_; }

  /// Encoder filters as an N x pixels matrix (the learned pattern bank).
  const Mat<T>& encoder_filters() const { return params_[enc_.weight_index()]; }
  Mat<T>& encoder_filters() { return params_[enc_.weight_index()]; }

private:
  NetworkConfig cfg_;
  ParamStore<T> params_;
  EncoderLinear<T> enc_;
  Dense<T> expand_;
  Fsrcnn<T> fsrcnn_;
  UnetPPHead<T> head_;
};

}  // namespace spixseg::nn
