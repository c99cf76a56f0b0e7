#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "spixseg/datasets.hpp"
#include "spixseg/rng.hpp"

namespace spixseg {

namespace fs = std::filesystem;

namespace {

void add_noise(cv::Mat& img, Rng& rng, double sigma) {
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      img.at<float>(y, x) += static_cast<float>(sigma * rng.normal());
    }
  }
}

cv::Mat to_u8(const cv::Mat& img) {
  cv::Mat out(img.rows, img.cols, CV_8UC1);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      out.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
          std::lround(255.0f * std::clamp(img.at<float>(y, x), 0.0f, 1.0f)));
    }
  }
  return out;
}

void write_png(const fs::path& p, const cv::Mat& u8) {
  require(cv::imwrite(p.string(), u8), "failed to write " + p.string());
}

struct EllipseSpec {
  cv::Point center;
  cv::Size axes;
  double angle;
};

void draw(cv::Mat& img, const EllipseSpec& e, double value) {
  cv::ellipse(img, e.center, e.axes, e.angle, 0, 360, cv::Scalar(value), cv::FILLED,
              cv::LINE_8);
}

}  // namespace

void synth_wbc(const fs::path& root, int count, std::uint64_t seed, int side) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::fork(seed, 0x57424300ULL + static_cast<std::uint64_t>(i));
    cv::Mat img(side, side, CV_32FC1, cv::Scalar(rng.uniform(0.05, 0.14)));
    cv::Mat lbl(side, side, CV_8UC1, cv::Scalar(0));

    // Red-cell distractors (background class, like the stained smear).
    const int n_rbc = 5 + static_cast<int>(rng.below(10));
    for (int r = 0; r < n_rbc; ++r) {
      EllipseSpec e;
      e.center = {static_cast<int>(rng.below(static_cast<std::uint64_t>(side))),
                  static_cast<int>(rng.below(static_cast<std::uint64_t>(side)))};
      const int a = 8 + static_cast<int>(rng.below(9));
      e.axes = {a, static_cast<int>(a * rng.uniform(0.75, 1.0))};
      e.angle = rng.uniform(0.0, 180.0);
      const double v = rng.uniform(0.16, 0.36);
      draw(img, e, v);
      if (rng.uniform() < 0.6) {
        EllipseSpec inner = e;
        inner.axes = {std::max(1, e.axes.width / 2), std::max(1, e.axes.height / 2)};
        draw(img, inner, v * rng.uniform(0.55, 0.8));
      }
    }

    // One white blood cell: gray cytoplasm with a brighter lobed nucleus.
    const double cx = side * rng.uniform(0.3, 0.7);
    const double cy = side * rng.uniform(0.3, 0.7);
    EllipseSpec cyto;
    cyto.center = {static_cast<int>(cx), static_cast<int>(cy)};
    const int ca = static_cast<int>(side * rng.uniform(0.16, 0.3));
    cyto.axes = {ca, static_cast<int>(ca * rng.uniform(0.62, 1.0))};
    cyto.angle = rng.uniform(0.0, 180.0);
    draw(img, cyto, rng.uniform(0.45, 0.65));
    draw(lbl, cyto, 1);

    cv::Mat nucleus_mask(side, side, CV_8UC1, cv::Scalar(0));
    const int lobes = 1 + static_cast<int>(rng.below(3));
    const double nucleus_v = rng.uniform(0.8, 0.97);
    for (int l = 0; l < lobes; ++l) {
      EllipseSpec nuc;
      const double off = rng.uniform(0.0, 0.45);
      const double dir = rng.uniform(0.0, 2.0 * M_PI);
      nuc.center = {static_cast<int>(cx + off * cyto.axes.width * std::cos(dir)),
                    static_cast<int>(cy + off * cyto.axes.height * std::sin(dir))};
      const int na = std::max(3, static_cast<int>(ca * rng.uniform(0.25, 0.5)));
      nuc.axes = {na, std::max(3, static_cast<int>(na * rng.uniform(0.6, 1.0)))};
      nuc.angle = rng.uniform(0.0, 180.0);
      draw(nucleus_mask, nuc, 1);
    }
    // Nucleus stays inside the cytoplasm.
    cv::Mat cyto_mask(side, side, CV_8UC1, cv::Scalar(0));
    draw(cyto_mask, cyto, 1);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        if (nucleus_mask.at<std::uint8_t>(y, x) && cyto_mask.at<std::uint8_t>(y, x)) {
          img.at<float>(y, x) = static_cast<float>(nucleus_v);
          lbl.at<std::uint8_t>(y, x) = 2;
        }
      }
    }

    cv::GaussianBlur(img, img, cv::Size(5, 5), 1.0);
    add_noise(img, rng, 0.015);

    cv::Mat lbl_gray(side, side, CV_8UC1);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const std::uint8_t c = lbl.at<std::uint8_t>(y, x);
        lbl_gray.at<std::uint8_t>(y, x) = c == 0 ? 0 : (c == 1 ? 128 : 255);
      }
    }

    char name[32];
    std::snprintf(name, sizeof(name), "wbc_%04d.png", i);
    write_png(root / "images" / name, to_u8(img));
    write_png(root / "labels" / name, lbl_gray);
  }
}

void synth_natural(const fs::path& root, int count, std::uint64_t seed, int side) {
  fs::create_directories(root);
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::fork(seed, 0x4e415400ULL + static_cast<std::uint64_t>(i));
    cv::Mat img(side, side, CV_32FC1, cv::Scalar(rng.uniform(0.0, 1.0)));
    const int shapes = 25 + static_cast<int>(rng.below(36));
    for (int s = 0; s < shapes; ++s) {
      const double v = rng.uniform(0.0, 1.0);
      // Power-law size distribution, dead-leaves style.
      const double r = 4.0 * std::pow(10.0, rng.uniform(0.0, 1.0));
      const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(side)));
      const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(side)));
      if (rng.uniform() < 0.7) {
        cv::ellipse(img, cv::Point(x, y),
                    cv::Size(static_cast<int>(r), static_cast<int>(r * rng.uniform(0.5, 1.0))),
                    rng.uniform(0.0, 180.0), 0, 360, cv::Scalar(v), cv::FILLED, cv::LINE_8);
      } else {
        const int w = static_cast<int>(r);
        const int h = static_cast<int>(r * rng.uniform(0.4, 1.0));
        cv::rectangle(img, cv::Point(x - w / 2, y - h / 2), cv::Point(x + w / 2, y + h / 2),
                      cv::Scalar(v), cv::FILLED);
      }
    }
    cv::GaussianBlur(img, img, cv::Size(3, 3), 0.7);
    add_noise(img, rng, 0.01);

    char name[32];
    std::snprintf(name, sizeof(name), "leaf_%05d.png", i);
    write_png(root / name, to_u8(img));
  }
}

void synth_uas(const fs::path& root, int train_count, int test_count, std::uint64_t seed,
               int side) {
  int written = 0;
  for (const auto& [part, n] : {std::pair<const char*, int>{"train", train_count},
                                std::pair<const char*, int>{"test", test_count}}) {
    fs::create_directories(root / part / "images");
    fs::create_directories(root / part / "labels");
    for (int i = 0; i < n; ++i, ++written) {
      Rng rng = Rng::fork(seed, 0x55415300ULL + static_cast<std::uint64_t>(written));
      // Sky over textured ground with a trapezoidal road; weather = global
      // brightness/noise jitter.
      const double daylight = rng.uniform(0.25, 1.0);
      cv::Mat img(side, side, CV_32FC1);
      const int horizon = static_cast<int>(side * rng.uniform(0.25, 0.45));
      for (int y = 0; y < side; ++y) {
        const double base = y < horizon ? 0.75 - 0.2 * y / horizon : 0.32;
        for (int x = 0; x < side; ++x) {
          img.at<float>(y, x) = static_cast<float>(base * daylight);
        }
      }
      cv::Mat lbl(side, side, CV_8UC1, cv::Scalar(0));
      const int top_w = static_cast<int>(side * rng.uniform(0.04, 0.14));
      const int bot_w = static_cast<int>(side * rng.uniform(0.3, 0.55));
      const int top_x = static_cast<int>(side * rng.uniform(0.3, 0.7));
      const int bot_x = static_cast<int>(side * rng.uniform(0.3, 0.7));
      const cv::Point pts[4] = {{top_x - top_w, horizon},
                                {top_x + top_w, horizon},
                                {bot_x + bot_w, side - 1},
                                {bot_x - bot_w, side - 1}};
      cv::fillConvexPoly(img, pts, 4, cv::Scalar(0.55 * daylight));
      cv::fillConvexPoly(lbl, pts, 4, cv::Scalar(255));
      cv::GaussianBlur(img, img, cv::Size(5, 5), 1.2);
      add_noise(img, rng, rng.uniform(0.01, 0.05));

      char name[32];
      std::snprintf(name, sizeof(name), "road_%05d.png", i);
      write_png(root / part / "images" / name, to_u8(img));
      write_png(root / part / "labels" / name, lbl);
    }
  }
}

}  // namespace spixseg
