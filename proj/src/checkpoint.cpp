#include "spixseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "spixseg/config_json.hpp"
#include "spixseg/digest.hpp"

namespace spixseg {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'P', 'X', 'C', 'K', 'P', 'T', '1'};

struct Writer {
  std::ofstream f;
  Sha256 hash;

  explicit Writer(const std::filesystem::path& p) : f(p, std::ios::binary) {
    require(f.good(), "cannot open checkpoint for writing: " + p.string());
  }
  void write(const void* data, std::size_t n) {
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    hash.update(data, n);
  }
};

struct Reader {
  std::ifstream f;
  Sha256 hash;

  explicit Reader(const std::filesystem::path& p) : f(p, std::ios::binary) {
    if (!f.good()) throw DataError("cannot open checkpoint: " + p.string());
  }
  void read(void* data, std::size_t n) {
    f.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f.gcount()) != n) {
      throw DataError("checkpoint truncated");
    }
    hash.update(data, n);
  }
};

json tensor_index(const nn::ParamStore<float>& ps) {
  json idx = json::array();
  for (const auto& e : ps.entries()) {
    idx.push_back({{"name", e.name},
                   {"group", nn::to_string(e.group)},
                   {"rows", e.value.rows()},
                   {"cols", e.value.cols()},
                   {"dtype", "f32"}});
  }
  return idx;
}

}  // namespace

void save_checkpoint(const nn::SegNet<float>& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path, nn::Adam<float>* opt) {
  json header = {
      {"format", "spixseg-checkpoint"},
      {"version", 1},
      {"network", model.config()},
      {"stage", meta.stage},
      {"epoch", meta.epoch},
      {"modulation", meta.modulation},
      {"bank_seed", meta.bank_seed},
      {"tensors", tensor_index(model.params())},
      {"has_adam", opt != nullptr},
  };
  if (meta.meas_stats) {
    std::vector<double> mean(meta.meas_stats->mean.begin(), meta.meas_stats->mean.end());
    std::vector<double> stddev(meta.meas_stats->stddev.begin(), meta.meas_stats->stddev.end());
    header["meas_stats"] = {{"mean", mean}, {"std", stddev}};
  }
  if (opt) header["adam_t"] = opt->t();

  const std::string hs = header.dump();
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    Writer w(tmp);
    w.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hs.size();
    w.write(&hlen, sizeof(hlen));
    w.write(hs.data(), hs.size());
    for (const auto& e : model.params().entries()) {
      w.write(e.value.data(), sizeof(float) * static_cast<std::size_t>(e.value.size()));
    }
    if (opt) {
      for (const auto& m : opt->moments1()) {
        w.write(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
      }
      for (const auto& v : opt->moments2()) {
        w.write(v.data(), sizeof(float) * static_cast<std::size_t>(v.size()));
      }
    }
    const auto digest = w.hash.finish();
    w.f.write(reinterpret_cast<const char*>(digest.data()),
              static_cast<std::streamsize>(digest.size()));
    require(w.f.good(), "checkpoint write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a spixseg checkpoint: " + path.string());
  }
  std::uint64_t hlen = 0;
  r.read(&hlen, sizeof(hlen));
  require(hlen < (1ull << 30), "checkpoint header too large");
  std::string hs(hlen, '\0');
  r.read(hs.data(), hlen);
  json header = json::parse(hs);
  if (header.value("version", 0) != 1) {
    throw DataError("unsupported checkpoint version in " + path.string());
  }

  nn::NetworkConfig cfg = header.at("network").get<nn::NetworkConfig>();
  LoadedCheckpoint out{nn::SegNet<float>(cfg), CheckpointMeta{}, nullptr};
  out.meta.stage = header.value("stage", 0);
  out.meta.epoch = header.value("epoch", 0);
  out.meta.modulation = header.value("modulation", "optimized");
  out.meta.bank_seed = header.value("bank_seed", std::uint64_t(0));
  if (header.contains("meas_stats")) {
    MeasurementStats st;
    const auto mean = header["meas_stats"].at("mean").get<std::vector<double>>();
    const auto stddev = header["meas_stats"].at("std").get<std::vector<double>>();
    st.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    st.stddev = Eigen::Map<const Vector>(stddev.data(), static_cast<Eigen::Index>(stddev.size()));
    out.meta.meas_stats = std::move(st);
  }

  auto& entries = out.model.params().entries();
  const json& idx = header.at("tensors");
  require(idx.size() == entries.size(), "checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& t = idx[i];
    if (t.at("name").get<std::string>() != entries[i].name ||
        t.at("rows").get<Eigen::Index>() != entries[i].value.rows() ||
        t.at("cols").get<Eigen::Index>() != entries[i].value.cols()) {
      throw DataError("checkpoint tensor layout mismatch at " + entries[i].name);
    }
    r.read(entries[i].value.data(), sizeof(float) * static_cast<std::size_t>(entries[i].value.size()));
  }

  if (header.value("has_adam", false)) {
    out.opt = std::make_unique<nn::Adam<float>>(out.model.params(), nn::Adam<float>::Options{});
    for (auto& m : out.opt->moments1()) {
      r.read(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
    }
    for (auto& v : out.opt->moments2()) {
      r.read(v.data(), sizeof(float) * static_cast<std::size_t>(v.size()));
    }
    out.opt->set_t(header.value("adam_t", 0L));
  }

  const auto computed = r.hash.finish();
  std::array<std::uint8_t, 32> stored{};
  r.f.read(reinterpret_cast<char*>(stored.data()), 32);
  if (r.f.gcount() != 32 || stored != computed) {
    throw DataError("checkpoint digest mismatch (corrupt or tampered): " + path.string());
  }
  return out;
}

void save_param_store(const nn::ParamStore<float>& ps, const std::string& meta_json,
                      const std::filesystem::path& path) {
  json header = {{"format", "spixseg-tensors"},
                 {"version", 1},
                 {"meta", json::parse(meta_json.empty() ? "{}" : meta_json)},
                 {"tensors", tensor_index(ps)}};
  const std::string hs = header.dump();
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    Writer w(tmp);
    w.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hs.size();
    w.write(&hlen, sizeof(hlen));
    w.write(hs.data(), hs.size());
    for (const auto& e : ps.entries()) {
      w.write(e.value.data(), sizeof(float) * static_cast<std::size_t>(e.value.size()));
    }
    const auto digest = w.hash.finish();
    w.f.write(reinterpret_cast<const char*>(digest.data()), 32);
    require(w.f.good(), "tensor store write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string load_param_store(nn::ParamStore<float>& ps, const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a spixseg tensor store: " + path.string());
  }
  std::uint64_t hlen = 0;
  r.read(&hlen, sizeof(hlen));
  require(hlen < (1ull << 30), "tensor store header too large");
  std::string hs(hlen, '\0');
  r.read(hs.data(), hlen);
  json header = json::parse(hs);
  auto& entries = ps.entries();
  const json& idx = header.at("tensors");
  require(idx.size() == entries.size(), "tensor store layout mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& t = idx[i];
    if (t.at("name").get<std::string>() != entries[i].name ||
        t.at("rows").get<Eigen::Index>() != entries[i].value.rows() ||
        t.at("cols").get<Eigen::Index>() != entries[i].value.cols()) {
      throw DataError("tensor store mismatch at " + entries[i].name);
    }
    r.read(entries[i].value.data(),
           sizeof(float) * static_cast<std::size_t>(entries[i].value.size()));
  }
  const auto computed = r.hash.finish();
  std::array<std::uint8_t, 32> stored{};
  r.f.read(reinterpret_cast<char*>(stored.data()), 32);
  if (r.f.gcount() != 32 || stored != computed) {
    throw DataError("tensor store digest mismatch: " + path.string());
  }
  return header.at("meta").dump();
}

}  // namespace spixseg
