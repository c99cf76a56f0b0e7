#include "spixseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace spixseg {

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt) {
  require_shape(pred.rows() == gt.rows() && pred.cols() == gt.cols(),
                "pixel_accuracy: shape mismatch");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (pred.data()[i] == gt.data()[i]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double dice(const LabelMap& pred, const LabelMap& gt, const std::vector<int>& classes) {
  require_shape(pred.rows() == gt.rows() && pred.cols() == gt.cols(), "dice: shape mismatch");
  require(!classes.empty(), "dice: class list must not be empty");
  double sum = 0.0;
  for (int c : classes) {
    Eigen::Index p = 0, g = 0, both = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      const bool in_p = pred.data()[i] == c;
      const bool in_g = gt.data()[i] == c;
      p += in_p;
      g += in_g;
      both += in_p && in_g;
    }
    sum += (p + g) == 0 ? 1.0 : 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
  }
  return 100.0 * sum / static_cast<double>(classes.size());
}

std::vector<int> foreground_classes(int n_classes) {
  std::vector<int> out;
  for (int c = 1; c < n_classes; ++c) out.push_back(c);
  return out;
}

MetricRow evaluate_predictor(const Predictor& predict, const std::vector<LabeledSample>& test,
                             int n_classes) {
  require(!test.empty(), "evaluate: empty test set");
  const auto fg = foreground_classes(n_classes);
  double pa_sum = 0.0, dice_sum = 0.0;
  for (const auto& s : test) {
    const LabelMap pred = predict(s);
    pa_sum += pixel_accuracy(pred, s.labels);
    dice_sum += dice(pred, s.labels, fg);
  }
  MetricRow row;
  row.pa = pa_sum / static_cast<double>(test.size());
  row.dice = dice_sum / static_cast<double>(test.size());
  row.n_samples = static_cast<int>(test.size());
  return row;
}

MetricRow evaluate_model(const nn::SegNet<float>& model, const std::vector<LabeledSample>& test,
                         const NoiseModel& noise) {
  const int h = model.config().scene_h, w = model.config().scene_w;
  PatternBank bank = patterns_from_encoder(model.encoder_filters(), h, w);
  return evaluate_predictor(
      [&](const LabeledSample& s) {
        const MeasurementVector m =
            simulate_measurements(s.scene.cast<double>(), bank, noise);
        nn::Workspace<float> ws;
        nn::Mat<float> meas = m.values.cast<float>();
        return model.infer_from_measurements(meas, ws);
      },
      test, model.config().n_classes);
}

namespace {

std::string csv_line(const MetricRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.10g,%s,%s,%s,%.4f,%.4f,%d,%llu\n", r.sampling_ratio,
                r.method.c_str(), r.modulation.c_str(), r.training.c_str(), r.pa, r.dice,
                r.n_samples, static_cast<unsigned long long>(r.seed));
  return buf;
}

constexpr const char* kCsvHeader = "sampling_ratio,method,modulation,training,pa,dice,n_samples,seed";

}  // namespace

void write_rows_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  std::ofstream f(path);
  require(f.good(), "cannot write results csv " + path.string());
  f << kCsvHeader << "\n";
  for (const auto& r : rows) f << csv_line(r);
}

void append_rows_csv(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream f(path, std::ios::app);
  require(f.good(), "cannot append results csv " + path.string());
  if (fresh) f << kCsvHeader << "\n";
  for (const auto& r : rows) f << csv_line(r);
}

std::vector<MetricRow> read_rows_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f.good()) throw DataError("cannot open results csv " + path.string());
  std::string line;
  std::getline(f, line);
  if (line != kCsvHeader) throw DataError("results csv: unexpected header in " + path.string());
  std::vector<MetricRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    MetricRow r;
    char method[64], modulation[64], training[64];
    unsigned long long seed = 0;
    if (std::sscanf(line.c_str(), "%lg,%63[^,],%63[^,],%63[^,],%lg,%lg,%d,%llu",
                    &r.sampling_ratio, method, modulation, training, &r.pa, &r.dice, &r.n_samples,
                    &seed) != 8) {
      throw DataError("results csv: malformed line: " + line);
    }
    r.method = method;
    r.modulation = modulation;
    r.training = training;
    r.seed = seed;
    rows.push_back(r);
  }
  return rows;
}

std::string render_table(const std::vector<MetricRow>& rows, const std::string& column_field,
                         bool markdown) {
  auto field = [&](const MetricRow& r) -> std::string {
    if (column_field == "method") return r.method;
    if (column_field == "modulation") return r.modulation;
    if (column_field == "training") return r.training;
    throw ConfigError("render_table: unknown column field " + column_field);
  };
  std::vector<std::string> columns;
  std::vector<double> ratios;
  for (const auto& r : rows) {
    if (std::find(columns.begin(), columns.end(), field(r)) == columns.end()) {
      columns.push_back(field(r));
    }
    if (std::find(ratios.begin(), ratios.end(), r.sampling_ratio) == ratios.end()) {
      ratios.push_back(r.sampling_ratio);
    }
  }
  std::sort(ratios.rbegin(), ratios.rend());

  auto cell = [&](double ratio, const std::string& col, bool want_pa) -> std::string {
    for (const auto& r : rows) {
      if (r.sampling_ratio == ratio && field(r) == col) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", want_pa ? r.pa : r.dice);
        return buf;
      }
    }
    return "-";
  };

  std::ostringstream out;
  const char* sep = markdown ? " | " : "  ";
  if (markdown) out << "| ";
  out << "Sampling ratio" << sep << "Metric";
  for (const auto& c : columns) out << sep << c;
  if (markdown) out << " |";
  out << "\n";
  if (markdown) {
    out << "|---|---";
    for (std::size_t i = 0; i < columns.size(); ++i) out << "|---";
    out << "|\n";
  }
  for (double ratio : ratios) {
    for (bool want_pa : {true, false}) {
      char rb[32];
      std::snprintf(rb, sizeof(rb), "%g", ratio);
      if (markdown) out << "| ";
      out << rb << sep << (want_pa ? "PA" : "DICE");
      for (const auto& c : columns) out << sep << cell(ratio, c, want_pa);
      if (markdown) out << " |";
      out << "\n";
    }
  }
  return out.str();
}

std::uint8_t class_to_gray(int c, int n_classes) {
  return static_cast<std::uint8_t>(std::lround(255.0 * c / (n_classes - 1)));
}

int gray_to_class(std::uint8_t v, int n_classes) {
  return static_cast<int>(std::lround(static_cast<double>(v) * (n_classes - 1) / 255.0));
}

namespace {

cv::Mat label_image(const LabelMap& labels, int n_classes, int scale) {
  cv::Mat img(static_cast<int>(labels.rows()), static_cast<int>(labels.cols()), CV_8UC1);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      img.at<std::uint8_t>(y, x) = class_to_gray(labels(y, x), n_classes);
    }
  }
  if (scale > 1) cv::resize(img, img, {}, scale, scale, cv::INTER_NEAREST);
  return img;
}

cv::Mat scene_image(const MatrixF& scene, int scale) {
  cv::Mat img(static_cast<int>(scene.rows()), static_cast<int>(scene.cols()), CV_8UC1);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      img.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
          std::lround(255.0f * std::clamp(scene(y, x), 0.0f, 1.0f)));
    }
  }
  if (scale > 1) cv::resize(img, img, {}, scale, scale, cv::INTER_NEAREST);
  return img;
}

}  // namespace

bool emit_panels(const std::vector<PanelItem>& items, const std::filesystem::path& path,
                 int n_classes, int cell_scale) {
  if (items.empty()) return false;
  const int cols = 1 + static_cast<int>(items.front().maps.size());
  const int cell = static_cast<int>(items.front().scene.rows()) * cell_scale;
  const int pad = 2;
  const int header = 14;
  cv::Mat grid(header + static_cast<int>(items.size()) * (cell + pad),
               cols * (cell + pad) - pad, CV_8UC1, cv::Scalar(32));

  auto put_header = [&](int col, const std::string& text) {
    cv::putText(grid, text, {col * (cell + pad) + 2, header - 3}, cv::FONT_HERSHEY_SIMPLEX, 0.35,
                cv::Scalar(255), 1, cv::LINE_8);
  };
  put_header(0, "scene");
  for (std::size_t c = 0; c < items.front().maps.size(); ++c) {
    put_header(static_cast<int>(c) + 1, items.front().maps[c].first);
  }

  for (std::size_t r = 0; r < items.size(); ++r) {
    const auto& item = items[r];
    require_shape(static_cast<int>(item.maps.size()) + 1 == cols,
                  "emit_panels: inconsistent column counts");
    const int y0 = header + static_cast<int>(r) * (cell + pad);
    scene_image(item.scene, cell_scale).copyTo(grid(cv::Rect(0, y0, cell, cell)));
    for (std::size_t c = 0; c < item.maps.size(); ++c) {
      label_image(item.maps[c].second, n_classes, cell_scale)
          .copyTo(grid(cv::Rect((static_cast<int>(c) + 1) * (cell + pad), y0, cell, cell)));
    }
  }
  require(cv::imwrite(path.string(), grid), "failed to write panel " + path.string());
  return true;
}

void write_label_png(const LabelMap& labels, int n_classes, const std::filesystem::path& path) {
  require(cv::imwrite(path.string(), label_image(labels, n_classes, 1)),
          "failed to write " + path.string());
}

LabelMap read_label_png(const std::filesystem::path& path, int n_classes) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw DataError("cannot read label png " + path.string());
  LabelMap m(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      m(y, x) = static_cast<std::uint8_t>(gray_to_class(img.at<std::uint8_t>(y, x), n_classes));
    }
  }
  return m;
}

}  // namespace spixseg
