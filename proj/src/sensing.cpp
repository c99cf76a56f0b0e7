#include "spixseg/sensing.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>

#include "spixseg/digest.hpp"
#include "spixseg/rng.hpp"

namespace spixseg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Modulation m) {
  switch (m) {
    case Modulation::random: return "random";
    case Modulation::hadamard: return "hadamard";
    case Modulation::learned: return "learned";
  }
  return "?";
}

Modulation modulation_from_string(const std::string& s) {
  if (s == "random") return Modulation::random;
  if (s == "hadamard") return Modulation::hadamard;
  if (s == "learned" || s == "optimized") return Modulation::learned;
  throw ConfigError("unknown modulation strategy: " + s);
}

PatternBank::PatternBank(Matrix flat, int height, int width, Modulation strategy,
                         std::uint64_t seed)
    : flat_(std::move(flat)), height_(height), width_(width), strategy_(strategy), seed_(seed) {
  require(height_ >= 1 && width_ >= 1, "pattern bank: dims must be positive");
  require(flat_.rows() >= 1, "pattern bank: needs at least one pattern");
  require_shape(flat_.cols() == static_cast<Eigen::Index>(height_) * width_,
                "pattern bank: flat width does not match dims");
  require(flat_.allFinite(), "pattern bank: entries must be finite");
  Sha256 h;
  h.update(flat_.data(), sizeof(double) * static_cast<std::size_t>(flat_.size()));
  const std::int32_t hw[2] = {height_, width_};
  h.update(hw, sizeof(hw));
  id_ = to_hex(h.finish());
}

Pattern PatternBank::pattern(int i) const {
  require(i >= 0 && i < count(), "pattern index out of range");
  Pattern p;
  p.index = i;
  p.values = Eigen::Map<const Matrix>(flat_.row(i).data(), height_, width_);
  return p;
}

int sampling_count(double ratio, int pixels) {
  if (!(ratio > 0.0) || ratio > 1.0 || !std::isfinite(ratio)) {
    throw ConfigError("sampling ratio must lie in (0, 1]");
  }
  require(pixels >= 1, "pixel count must be positive");
  const int n = static_cast<int>(std::floor(ratio * static_cast<double>(pixels)));
  return std::max(1, n);
}

PatternBank make_random_patterns(int count, int height, int width, std::uint64_t seed) {
  require(count >= 1, "pattern count must be >= 1");
  Rng rng(splitmix64(seed ^ 0x5350495852414e44ULL));
  Matrix flat(count, static_cast<Eigen::Index>(height) * width);
  for (Eigen::Index i = 0; i < flat.rows(); ++i) {
    for (Eigen::Index j = 0; j < flat.cols(); ++j) flat(i, j) = rng.uniform();
  }
  return PatternBank(std::move(flat), height, width, Modulation::random, seed);
}

int hadamard_entry(int order, int row, int col) {
  const unsigned v = static_cast<unsigned>(row) & static_cast<unsigned>(col);
  return (std::popcount(v) & 1) ? -1 : 1;
}

namespace {
int log2_exact(int n) {
  int k = 0;
  while ((1 << k) < n) ++k;
  return k;
}
}  // namespace

int hadamard_row_for_sequency(int order, int s) {
  // Sequency s -> natural index: bit-reverse the Gray code of s.
  const int bits = log2_exact(order);
  unsigned g = static_cast<unsigned>(s) ^ (static_cast<unsigned>(s) >> 1);
  unsigned r = 0;
  for (int b = 0; b < bits; ++b) {
    r = (r << 1) | (g & 1u);
    g >>= 1;
  }
  return static_cast<int>(r);
}

PatternBank make_hadamard_patterns(int count, int height, int width, HadamardOrdering ordering) {
  require(count >= 1, "pattern count must be >= 1");
  const long long order_ll = static_cast<long long>(height) * width;
  const int order = static_cast<int>(order_ll);
  if (order < 1 || (order & (order - 1)) != 0) {
    throw ConfigError("hadamard construction requires H*W to be a power of two");
  }
  if (count > order) {
    throw ConfigError("hadamard bank capacity exceeded: count " + std::to_string(count) +
                      " > order " + std::to_string(order));
  }
  Matrix flat(count, order);
  for (int i = 0; i < count; ++i) {
    const int row = ordering == HadamardOrdering::sequency ? hadamard_row_for_sequency(order, i) : i;
    for (int j = 0; j < order; ++j) flat(i, j) = hadamard_entry(order, row, j);
  }
  return PatternBank(std::move(flat), height, width, Modulation::hadamard, 0);
}

PatternBank make_identity_patterns(int height, int width) {
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  Matrix flat = Matrix::Identity(n, n);
  return PatternBank(std::move(flat), height, width, Modulation::random, 0);
}

MeasurementVector apply_noise(const MeasurementVector& clean, const NoiseModel& noise) {
  if (noise.kind == NoiseModel::Kind::none) return clean;
  require(std::isfinite(noise.snr_db), "noise model: snr_db must be finite");
  MeasurementVector out = clean;
  const double signal_power = clean.values.squaredNorm() / std::max<Eigen::Index>(1, clean.values.size());
  const double noise_std = std::sqrt(signal_power) * std::pow(10.0, -noise.snr_db / 20.0);
  Rng rng = Rng::fork(noise.seed, 0x6e6f697365ULL);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    out.values[i] += noise_std * rng.normal();
  }
  out.noise_meta = noise;
  return out;
}

MeasurementVector simulate_measurements(const Matrix& scene, const PatternBank& bank,
                                        const NoiseModel& noise) {
  require_shape(scene.rows() == bank.height() && scene.cols() == bank.width(),
                "simulate_measurements: scene dims do not match pattern bank dims");
  MeasurementVector m;
  m.bank_id = bank.id();
  Eigen::Map<const Vector> flat_scene(scene.data(), scene.size());
  m.values = bank.flat() * flat_scene;
  return apply_noise(m, noise);
}

PatternBank patterns_from_encoder(const Matrix& filters_flat, int height, int width) {
  return PatternBank(filters_flat, height, width, Modulation::learned, 0);
}

PatternBank patterns_from_encoder(const MatrixF& filters_flat, int height, int width) {
  return PatternBank(filters_flat.cast<double>(), height, width, Modulation::learned, 0);
}

PatternBank patterns_from_encoder(const Eigen::MatrixXf& filters_flat, int height, int width) {
  return PatternBank(filters_flat.cast<double>(), height, width, Modulation::learned, 0);
}

ExportedBank export_patterns(const PatternBank& bank, const fs::path& outdir) {
  fs::create_directories(outdir);
  ExportedBank out;

  json scaling = json::array();
  for (int i = 0; i < bank.count(); ++i) {
    const Pattern p = bank.pattern(i);
    const double lo = p.values.minCoeff();
    const double hi = p.values.maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    cv::Mat img(bank.height(), bank.width(), CV_8UC1);
    for (int y = 0; y < bank.height(); ++y) {
      for (int x = 0; x < bank.width(); ++x) {
        img.at<std::uint8_t>(y, x) =
            static_cast<std::uint8_t>(std::lround(255.0 * (p.values(y, x) - lo) / span));
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "pattern_%04d.png", i);
    const fs::path png = outdir / name;
    require(cv::imwrite(png.string(), img), "failed to write " + png.string());
    out.pngs.push_back(png);
    scaling.push_back({{"index", i}, {"min", lo}, {"max", hi}});
  }

  out.csv = outdir / "patterns.csv";
  {
    std::ofstream f(out.csv);
    require(f.good(), "failed to open " + out.csv.string());
    f << "index,row,col,value\n";
    char buf[64];
    for (int i = 0; i < bank.count(); ++i) {
      for (int y = 0; y < bank.height(); ++y) {
        for (int x = 0; x < bank.width(); ++x) {
          std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g\n", i, y, x,
                        bank.flat()(i, static_cast<Eigen::Index>(y) * bank.width() + x));
          f << buf;
        }
      }
    }
  }

  std::ifstream csv_in(out.csv, std::ios::binary);
  std::stringstream csv_bytes;
  csv_bytes << csv_in.rdbuf();

  json manifest = {
      {"format", "spixseg-pattern-bank/1"},
      {"strategy", to_string(bank.strategy())},
      {"height", bank.height()},
      {"width", bank.width()},
      {"count", bank.count()},
      {"seed", bank.seed()},
      {"bank_id", bank.id()},
      {"png_scaling", scaling},
      {"csv_digest", sha256_hex(csv_bytes.str())},
  };
  out.manifest = outdir / "manifest.json";
  std::ofstream mf(out.manifest);
  mf << manifest.dump(2) << "\n";
  return out;
}

PatternBank import_patterns_csv(const fs::path& csv, const fs::path& manifest) {
  std::ifstream mf(manifest);
  if (!mf.good()) throw DataError("cannot open pattern manifest " + manifest.string());
  json meta = json::parse(mf);
  const int count = meta.at("count").get<int>();
  const int height = meta.at("height").get<int>();
  const int width = meta.at("width").get<int>();

  std::ifstream f(csv);
  if (!f.good()) throw DataError("cannot open pattern csv " + csv.string());
  std::string header;
  std::getline(f, header);
  if (header != "index,row,col,value") throw DataError("pattern csv: unexpected header");

  Matrix flat = Matrix::Zero(count, static_cast<Eigen::Index>(height) * width);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    int i, y, x;
    double v;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lg", &i, &y, &x, &v) != 4) {
      throw DataError("pattern csv: malformed line: " + line);
    }
    if (i < 0 || i >= count || y < 0 || y >= height || x < 0 || x >= width) {
      throw DataError("pattern csv: index out of range: " + line);
    }
    flat(i, static_cast<Eigen::Index>(y) * width + x) = v;
    ++rows;
  }
  if (rows != static_cast<std::size_t>(count) * height * width) {
    throw DataError("pattern csv: row count does not match manifest");
  }
  PatternBank bank(std::move(flat), height, width,
                   modulation_from_string(meta.at("strategy").get<std::string>()),
                   meta.at("seed").get<std::uint64_t>());
  if (meta.contains("bank_id") && meta.at("bank_id").get<std::string>() != bank.id()) {
    throw DataError("pattern csv: bank digest does not match manifest");
  }
  return bank;
}

}  // namespace spixseg
