#include "spixseg/datasets.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "spixseg/digest.hpp"
#include "spixseg/rng.hpp"

namespace spixseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_image_file(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".bmp" || e == ".tif" || e == ".tiff";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

MatrixF to_scene(const cv::Mat& gray, int side) {
  cv::Mat r;
  cv::resize(gray, r, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
  MatrixF s(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) s(y, x) = static_cast<float>(r.at<std::uint8_t>(y, x)) / 255.0f;
  }
  return s;
}

LabelMap to_wbc_labels(const cv::Mat& gray, int side) {
  cv::Mat r;
  cv::resize(gray, r, cv::Size(side, side), 0, 0, cv::INTER_NEAREST);
  LabelMap m(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const std::uint8_t v = r.at<std::uint8_t>(y, x);
      // Midpoint thresholds for the {0, mid, max} gray coding.
      m(y, x) = v < 64 ? 0 : (v < 192 ? 1 : 2);
    }
  }
  return m;
}

LabelMap to_binary_labels(const cv::Mat& gray, int side) {
  cv::Mat r;
  cv::resize(gray, r, cv::Size(side, side), 0, 0, cv::INTER_NEAREST);
  LabelMap m(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) m(y, x) = r.at<std::uint8_t>(y, x) > 127 ? 1 : 0;
  }
  return m;
}

cv::Mat scene_to_cv(const MatrixF& s) {
  cv::Mat m(static_cast<int>(s.rows()), static_cast<int>(s.cols()), CV_32FC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) m.at<float>(y, x) = s(y, x);
  }
  return m;
}

cv::Mat labels_to_cv(const LabelMap& l) {
  cv::Mat m(static_cast<int>(l.rows()), static_cast<int>(l.cols()), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) m.at<std::uint8_t>(y, x) = l(y, x);
  }
  return m;
}

MatrixF cv_to_scene(const cv::Mat& m) {
  MatrixF s(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) s(y, x) = std::clamp(m.at<float>(y, x), 0.0f, 1.0f);
  }
  return s;
}

LabelMap cv_to_labels(const cv::Mat& m) {
  LabelMap l(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) l(y, x) = m.at<std::uint8_t>(y, x);
  }
  return l;
}

cv::Mat affine_to_cv(const std::array<double, 6>& a) {
  cv::Mat m(2, 3, CV_64FC1);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) m.at<double>(r, c) = a[static_cast<std::size_t>(r * 3 + c)];
  }
  return m;
}

LabeledSample warp_sample(const LabeledSample& s, const std::array<double, 6>& affine,
                          const std::string& tag) {
  const cv::Mat M = affine_to_cv(affine);
  cv::Mat scene_w, labels_w;
  cv::warpAffine(scene_to_cv(s.scene), scene_w, M, scene_to_cv(s.scene).size(), cv::INTER_LINEAR,
                 cv::BORDER_CONSTANT, cv::Scalar(0));
  cv::warpAffine(labels_to_cv(s.labels), labels_w, M, labels_to_cv(s.labels).size(),
                 cv::INTER_NEAREST, cv::BORDER_CONSTANT, cv::Scalar(0));
  return {cv_to_scene(scene_w), cv_to_labels(labels_w), s.source_id, s.augmentation_tag + tag};
}

LabeledSample flip_sample(const LabeledSample& s, int code, const std::string& tag) {
  cv::Mat scene_f, labels_f;
  cv::flip(scene_to_cv(s.scene), scene_f, code);
  cv::flip(labels_to_cv(s.labels), labels_f, code);
  return {cv_to_scene(scene_f), cv_to_labels(labels_f), s.source_id, tag};
}

}  // namespace

std::vector<LabeledSample> load_wbc(const fs::path& root, int side) {
  const fs::path img_dir = root / "images";
  const fs::path lbl_dir = root / "labels";
  if (!fs::is_directory(img_dir) || !fs::is_directory(lbl_dir)) {
    throw DataError("wbc root must contain images/ and labels/: " + root.string());
  }
  std::map<std::string, fs::path> labels_by_stem;
  for (const auto& p : list_images(lbl_dir)) labels_by_stem[p.stem().string()] = p;

  std::vector<std::string> offenders;
  std::vector<LabeledSample> out;
  for (const auto& img_path : list_images(img_dir)) {
    const std::string stem = img_path.stem().string();
    const auto it = labels_by_stem.find(stem);
    if (it == labels_by_stem.end()) {
      offenders.push_back(stem + " (missing label)");
      continue;
    }
    cv::Mat img = cv::imread(img_path.string(), cv::IMREAD_GRAYSCALE);
    cv::Mat lbl = cv::imread(it->second.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty() || lbl.empty()) {
      offenders.push_back(stem + " (unreadable)");
      continue;
    }
    if (img.size() != lbl.size()) {
      offenders.push_back(stem + " (image/label size mismatch)");
      continue;
    }
    out.push_back({to_scene(img, side), to_wbc_labels(lbl, side), stem, "id"});
  }
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << "wbc ingestion failed for " << offenders.size() << " file(s):";
    for (const auto& o : offenders) msg << " " << o << ";";
    throw DataError(msg.str());
  }
  return out;
}

AugmentPlan augment_plan(int mirrored_index, int side, std::uint64_t seed) {
  Rng rng = Rng::fork(seed, 0x41554731ULL + static_cast<std::uint64_t>(mirrored_index));
  const double angle = rng.uniform(-15.0, 15.0);
  const double scale = rng.uniform(0.9, 1.1);
  const double tx = rng.uniform(-0.1, 0.1) * side;
  const double ty = rng.uniform(-0.1, 0.1) * side;
  const cv::Point2f center(static_cast<float>(side) / 2.0f, static_cast<float>(side) / 2.0f);

  AugmentPlan plan{};
  cv::Mat m = cv::getRotationMatrix2D(center, angle, scale);
  m.at<double>(0, 2) += tx;
  m.at<double>(1, 2) += ty;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) plan.affine[static_cast<std::size_t>(r * 3 + c)] = m.at<double>(r, c);
  }
  cv::Mat r50 = cv::getRotationMatrix2D(center, 50.0, 1.0);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) plan.rot50[static_cast<std::size_t>(r * 3 + c)] = r50.at<double>(r, c);
  }
  return plan;
}

std::vector<LabeledSample> augment_wbc(const std::vector<LabeledSample>& raw, std::uint64_t seed) {
  if (raw.size() != 300) {
    throw DataError("augment_wbc expects the 300-image corpus, got " +
                    std::to_string(raw.size()));
  }
  // Stage A: the dihedral-subgroup mirrors {id, h, v, hv}: 300 -> 1200.
  std::vector<LabeledSample> mirrored;
  mirrored.reserve(raw.size() * 4);
  for (const auto& s : raw) {
    LabeledSample id = s;
    id.augmentation_tag = "id";
    mirrored.push_back(std::move(id));
    mirrored.push_back(flip_sample(s, 1, "h"));
    mirrored.push_back(flip_sample(s, 0, "v"));
    mirrored.push_back(flip_sample(flip_sample(s, 1, "h"), 0, "hv"));
  }
  // Stage B: original + random affine + fixed 50-degree rotation: 1200 -> 3600.
  const int side = static_cast<int>(raw.front().scene.rows());
  std::vector<LabeledSample> out;
  out.reserve(mirrored.size() * 3);
  for (std::size_t i = 0; i < mirrored.size(); ++i) {
    const AugmentPlan plan = augment_plan(static_cast<int>(i), side, seed);
    out.push_back(mirrored[i]);
    out.push_back(warp_sample(mirrored[i], plan.affine, "+aff"));
    out.push_back(warp_sample(mirrored[i], plan.rot50, "+rot50"));
  }
  return out;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    std::vector<LabeledSample> samples, int train_count, std::uint64_t seed) {
  if (train_count <= 0 || train_count >= static_cast<int>(samples.size())) {
    throw DataError("split: train count " + std::to_string(train_count) +
                    " incompatible with dataset size " + std::to_string(samples.size()));
  }
  std::vector<int> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::fork(seed, 0x53504c49ULL);
  rng.shuffle(idx);
  std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> out;
  out.first.reserve(static_cast<std::size_t>(train_count));
  out.second.reserve(samples.size() - static_cast<std::size_t>(train_count));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto& dst = static_cast<int>(i) < train_count ? out.first : out.second;
    dst.push_back(std::move(samples[static_cast<std::size_t>(idx[i])]));
  }
  return out;
}

std::vector<LabeledSample> subsample(const std::vector<LabeledSample>& samples, int count,
                                     std::uint64_t seed) {
  require(count >= 1 && count <= static_cast<int>(samples.size()),
          "subsample: bad count " + std::to_string(count));
  std::vector<int> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::fork(seed, 0x53554253ULL);
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  std::vector<LabeledSample> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(samples[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<MatrixF> load_natural_pretrain(const fs::path& root, int limit, int side) {
  const auto files = list_images(root);
  if (static_cast<int>(files.size()) < limit) {
    throw DataError("natural pretrain corpus has " + std::to_string(files.size()) +
                    " images, need " + std::to_string(limit));
  }
  std::vector<MatrixF> out;
  out.reserve(static_cast<std::size_t>(limit));
  for (int i = 0; i < limit; ++i) {
    cv::Mat img = cv::imread(files[static_cast<std::size_t>(i)].string(), cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw DataError("unreadable image: " + files[static_cast<std::size_t>(i)].string());
    out.push_back(to_scene(img, side));
  }
  return out;
}

namespace {

std::vector<LabeledSample> load_binary_dir(const fs::path& root, int side) {
  const auto img_files = list_images(root / "images");
  std::map<std::string, fs::path> labels_by_stem;
  for (const auto& p : list_images(root / "labels")) labels_by_stem[p.stem().string()] = p;
  std::vector<LabeledSample> out;
  std::vector<std::string> offenders;
  for (const auto& img_path : img_files) {
    const std::string stem = img_path.stem().string();
    const auto it = labels_by_stem.find(stem);
    if (it == labels_by_stem.end()) {
      offenders.push_back(stem + " (missing label)");
      continue;
    }
    cv::Mat img = cv::imread(img_path.string(), cv::IMREAD_GRAYSCALE);
    cv::Mat lbl = cv::imread(it->second.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty() || lbl.empty()) {
      offenders.push_back(stem + " (unreadable)");
      continue;
    }
    out.push_back({to_scene(img, side), to_binary_labels(lbl, side), stem, "id"});
  }
  if (!offenders.empty()) {
    throw DataError("uas ingestion failed for " + std::to_string(offenders.size()) +
                    " file(s), first: " + offenders.front());
  }
  return out;
}

}  // namespace

UasDataset load_uas(const fs::path& root, int side) {
  if (!fs::is_directory(root)) {
    throw DataError("optional dataset unavailable: " + root.string());
  }
  UasDataset ds;
  ds.train = load_binary_dir(root / "train", side);
  ds.test = load_binary_dir(root / "test", side);
  return ds;
}

// --- prepared dataset container ---------------------------------------------

namespace {

constexpr char kDsetMagic[8] = {'S', 'P', 'X', 'D', 'S', 'E', 'T', '1'};

void write_samples(std::ofstream& f, Sha256& hash, const std::vector<LabeledSample>& v) {
  for (const auto& s : v) {
    f.write(reinterpret_cast<const char*>(s.scene.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(s.scene.size())));
    hash.update(s.scene.data(), sizeof(float) * static_cast<std::size_t>(s.scene.size()));
    f.write(reinterpret_cast<const char*>(s.labels.data()),
            static_cast<std::streamsize>(s.labels.size()));
    hash.update(s.labels.data(), static_cast<std::size_t>(s.labels.size()));
  }
}

void read_samples(std::ifstream& f, Sha256& hash, std::vector<LabeledSample>& v, int side) {
  for (auto& s : v) {
    s.scene.resize(side, side);
    s.labels.resize(side, side);
    f.read(reinterpret_cast<char*>(s.scene.data()),
           static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(s.scene.size())));
    f.read(reinterpret_cast<char*>(s.labels.data()), static_cast<std::streamsize>(s.labels.size()));
    if (!f.good()) throw DataError("prepared dataset truncated");
    hash.update(s.scene.data(), sizeof(float) * static_cast<std::size_t>(s.scene.size()));
    hash.update(s.labels.data(), static_cast<std::size_t>(s.labels.size()));
  }
}

json manifest_to_json(const DatasetManifest& m) {
  return {{"name", m.name},
          {"class_names", m.class_names},
          {"counts",
           {{"raw", m.raw_count},
            {"augmented", m.augmented_count},
            {"train", m.train_count},
            {"test", m.test_count}}},
          {"split_seed", m.split_seed},
          {"provenance", m.provenance}};
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.name = j.value("name", "");
  if (j.contains("class_names")) m.class_names = j["class_names"].get<std::vector<std::string>>();
  m.raw_count = j["counts"].value("raw", 0);
  m.augmented_count = j["counts"].value("augmented", 0);
  m.train_count = j["counts"].value("train", 0);
  m.test_count = j["counts"].value("test", 0);
  m.split_seed = j.value("split_seed", std::uint64_t(0));
  m.provenance = j.value("provenance", "");
  return m;
}

}  // namespace

void write_manifest_json(const DatasetManifest& m, const fs::path& path) {
  std::ofstream f(path);
  require(f.good(), "cannot write manifest " + path.string());
  f << manifest_to_json(m).dump(2) << "\n";
}

void save_prepared(const PreparedDataset& ds, const fs::path& path) {
  require(!ds.train.empty(), "prepared dataset: empty train split");
  const int side = static_cast<int>(ds.train.front().scene.rows());
  json header = manifest_to_json(ds.manifest);
  header["side"] = side;
  header["n_train"] = ds.train.size();
  header["n_test"] = ds.test.size();
  const std::string hs = header.dump();

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    require(f.good(), "cannot write prepared dataset " + tmp.string());
    Sha256 hash;
    f.write(kDsetMagic, sizeof(kDsetMagic));
    hash.update(kDsetMagic, sizeof(kDsetMagic));
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    hash.update(&hlen, sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    hash.update(hs);
    write_samples(f, hash, ds.train);
    write_samples(f, hash, ds.test);
    const auto digest = hash.finish();
    f.write(reinterpret_cast<const char*>(digest.data()), 32);
    require(f.good(), "prepared dataset write failed");
  }
  fs::rename(tmp, path);
}

PreparedDataset load_prepared(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw DataError("cannot open prepared dataset: " + path.string());
  Sha256 hash;
  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kDsetMagic, 8) != 0) {
    throw DataError("not a prepared dataset: " + path.string());
  }
  hash.update(magic, 8);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  hash.update(&hlen, sizeof(hlen));
  require(hlen < (1ull << 30), "prepared dataset header too large");
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  hash.update(hs);
  json header = json::parse(hs);

  PreparedDataset ds;
  ds.manifest = manifest_from_json(header);
  const int side = header.at("side").get<int>();
  ds.train.resize(header.at("n_train").get<std::size_t>());
  ds.test.resize(header.at("n_test").get<std::size_t>());
  read_samples(f, hash, ds.train, side);
  read_samples(f, hash, ds.test, side);

  const auto computed = hash.finish();
  std::array<std::uint8_t, 32> stored{};
  f.read(reinterpret_cast<char*>(stored.data()), 32);
  if (f.gcount() != 32 || stored != computed) {
    throw DataError("prepared dataset digest mismatch: " + path.string());
  }
  return ds;
}

}  // namespace spixseg
