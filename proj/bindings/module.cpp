#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "spixseg/baselines.hpp"
#include "spixseg/checkpoint.hpp"
#include "spixseg/config_json.hpp"
#include "spixseg/evaluation.hpp"
#include "spixseg/experiment.hpp"
#include "spixseg/sensing.hpp"
#include "spixseg/training.hpp"

namespace py = pybind11;
using namespace spixseg;

namespace {

py::array_t<double> bank_to_array(const PatternBank& bank) {
  py::array_t<double> out({bank.count(), bank.height(), bank.width()});
  auto r = out.mutable_unchecked<3>();
  for (int i = 0; i < bank.count(); ++i) {
    for (int y = 0; y < bank.height(); ++y) {
      for (int x = 0; x < bank.width(); ++x) {
        r(i, y, x) = bank.flat()(i, static_cast<Eigen::Index>(y) * bank.width() + x);
      }
    }
  }
  return out;
}

PatternBank bank_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                            Modulation strategy) {
  if (a.ndim() != 3) throw ShapeError("patterns must be an (N, H, W) array");
  const int n = static_cast<int>(a.shape(0));
  const int h = static_cast<int>(a.shape(1));
  const int w = static_cast<int>(a.shape(2));
  Matrix flat(n, static_cast<Eigen::Index>(h) * w);
  auto r = a.unchecked<3>();
  for (int i = 0; i < n; ++i) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) flat(i, static_cast<Eigen::Index>(y) * w + x) = r(i, y, x);
    }
  }
  return PatternBank(std::move(flat), h, w, strategy, 0);
}

HadamardOrdering ordering_from_string(const std::string& s) {
  if (s == "natural") return HadamardOrdering::natural;
  if (s == "sequency") return HadamardOrdering::sequency;
  throw ConfigError("ordering must be 'natural' or 'sequency'");
}

/// Thin façade over the trained network for python callers.
class Model {
public:
  explicit Model(const std::filesystem::path& path) : loaded_(load_checkpoint(path)) {}
  Model(const std::string& config_json, std::uint64_t seed)
      : loaded_{nn::SegNet<float>(nlohmann::json::parse(config_json).get<nn::NetworkConfig>()),
                CheckpointMeta{}, nullptr} {
    initialize(loaded_.model, seed);
  }

  int n_measurements() const { return loaded_.model.config().n_measurements; }
  int n_classes() const { return loaded_.model.config().n_classes; }
  int scene_side() const { return loaded_.model.config().scene_h; }
  std::string modulation() const { return loaded_.meta.modulation; }

  Vector encode(const Matrix& scene) const {
    check_scene(scene);
    nn::Mat<float> flat(scene.size(), 1);
    for (Eigen::Index i = 0; i < scene.size(); ++i) flat(i, 0) = static_cast<float>(scene.data()[i]);
    nn::Mat<float> m = loaded_.model.encode(flat);
    return m.col(0).cast<double>();
  }

  py::array_t<float> forward(const Matrix& scene) const {
    check_scene(scene);
    nn::Mat<float> flat(scene.size(), 1);
    for (Eigen::Index i = 0; i < scene.size(); ++i) flat(i, 0) = static_cast<float>(scene.data()[i]);
    nn::Workspace<float> ws;
    nn::SegNet<float>::Acts acts;
    nn::Mat<float> logits = loaded_.model.forward(flat, acts, ws);
    const auto& cfg = loaded_.model.config();
    py::array_t<float> out({cfg.n_classes, cfg.scene_h, cfg.scene_w});
    auto r = out.mutable_unchecked<3>();
    for (int c = 0; c < cfg.n_classes; ++c) {
      for (int y = 0; y < cfg.scene_h; ++y) {
        for (int x = 0; x < cfg.scene_w; ++x) {
          r(c, y, x) = logits(c, static_cast<Eigen::Index>(y) * cfg.scene_w + x);
        }
      }
    }
    return out;
  }

  LabelMap infer_from_measurements(const Vector& meas) const {
    if (meas.size() != n_measurements()) {
      throw ShapeError("measurement length " + std::to_string(meas.size()) + " != model N " +
                       std::to_string(n_measurements()));
    }
    nn::Workspace<float> ws;
    nn::Mat<float> m = meas.cast<float>();
    return loaded_.model.infer_from_measurements(m, ws);
  }

  py::array_t<double> patterns() const {
    const auto& cfg = loaded_.model.config();
    return bank_to_array(
        patterns_from_encoder(loaded_.model.encoder_filters(), cfg.scene_h, cfg.scene_w));
  }

  void save(const std::filesystem::path& path) const {
    save_checkpoint(loaded_.model, loaded_.meta, path);
  }

private:
  void check_scene(const Matrix& scene) const {
    const auto& cfg = loaded_.model.config();
    if (scene.rows() != cfg.scene_h || scene.cols() != cfg.scene_w) {
      throw ShapeError("scene must be " + std::to_string(cfg.scene_h) + "x" +
                       std::to_string(cfg.scene_w));
    }
  }

  LoadedCheckpoint loaded_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Image-free single-pixel segmentation core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def("sampling_count", &sampling_count, py::arg("ratio"), py::arg("pixels"),
        "max(1, floor(ratio * pixels))");
  m.def("lr_at", &lr_at, py::arg("epoch"), py::arg("lr0"), py::arg("decay"), py::arg("every"));

  m.def(
      "make_random_patterns",
      [](int count, int h, int w, std::uint64_t seed) {
        return bank_to_array(make_random_patterns(count, h, w, seed));
      },
      py::arg("count"), py::arg("height"), py::arg("width"), py::arg("seed"));
  m.def(
      "make_hadamard_patterns",
      [](int count, int h, int w, const std::string& ordering) {
        return bank_to_array(make_hadamard_patterns(count, h, w, ordering_from_string(ordering)));
      },
      py::arg("count"), py::arg("height"), py::arg("width"), py::arg("ordering") = "sequency");
  m.def("hadamard_row_for_sequency", &hadamard_row_for_sequency, py::arg("order"), py::arg("s"));

  m.def(
      "simulate_measurements",
      [](const Matrix& scene,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& patterns) {
        return simulate_measurements(scene, bank_from_array(patterns, Modulation::learned)).values;
      },
      py::arg("scene"), py::arg("patterns"));

  m.def(
      "apply_noise",
      [](const Vector& values, const std::string& kind, double snr_db, std::uint64_t seed) {
        MeasurementVector v;
        v.values = values;
        NoiseModel n;
        n.kind = kind == "none" ? NoiseModel::Kind::none : NoiseModel::Kind::additive_gaussian;
        n.snr_db = snr_db;
        n.seed = seed;
        return apply_noise(v, n).values;
      },
      py::arg("values"), py::arg("kind") = "additive_gaussian", py::arg("snr_db") = 20.0,
      py::arg("seed") = 0);

  m.def("pixel_accuracy", &pixel_accuracy, py::arg("pred"), py::arg("gt"));
  m.def("dice", &dice, py::arg("pred"), py::arg("gt"), py::arg("classes"));

  m.def(
      "tv_reconstruct",
      [](const Vector& meas,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& patterns,
         double lambda, int max_iters, double tol, const std::string& kind,
         const std::string& step) {
        MeasurementVector v;
        v.values = meas;
        TvConfig cfg;
        cfg.lambda = lambda;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        cfg.kind = kind == "isotropic" ? TvConfig::Kind::isotropic : TvConfig::Kind::anisotropic;
        cfg.step = step == "backtracking" ? TvConfig::Step::backtracking : TvConfig::Step::fixed;
        const ReconstructedImage rec =
            tv_reconstruct(v, bank_from_array(patterns, Modulation::random), cfg);
        return py::make_tuple(rec.pixels, rec.objective_trace, rec.iters_used, rec.converged);
      },
      py::arg("measurements"), py::arg("patterns"), py::arg("lambda_") = 1e-2,
      py::arg("max_iters") = 200, py::arg("tol") = 1e-6, py::arg("kind") = "anisotropic",
      py::arg("step") = "fixed",
      "Returns (image, objective_trace, iters_used, converged).");

  m.def(
      "synth_wbc",
      [](const std::string& root, int count, std::uint64_t seed, int side) {
        synth_wbc(root, count, seed, side);
      },
      py::arg("root"), py::arg("count") = 300, py::arg("seed") = 123, py::arg("side") = 120);
  m.def(
      "synth_natural",
      [](const std::string& root, int count, std::uint64_t seed, int side) {
        synth_natural(root, count, seed, side);
      },
      py::arg("root"), py::arg("count") = 1200, py::arg("seed") = 5, py::arg("side") = 96);

  m.def("default_config_json",
        [] { return config_to_json(ExperimentConfig{}).dump(2); });
  m.def(
      "run_cell",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = config_from_json(nlohmann::json::parse(config_json));
        const MetricRow row = run_cell(cfg);
        nlohmann::json j = {{"sampling_ratio", row.sampling_ratio}, {"method", row.method},
                            {"modulation", row.modulation},         {"training", row.training},
                            {"pa", row.pa},                         {"dice", row.dice},
                            {"n_samples", row.n_samples},           {"seed", row.seed}};
        return j.dump();
      },
      py::arg("config_json"),
      "Train/evaluate one experiment cell (cached); returns the metric row as JSON.");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def_static(
          "init",
          [](const std::string& config_json, std::uint64_t seed) {
            return Model(config_json, seed);
          },
          py::arg("config_json"), py::arg("seed") = 0,
          "Fresh network with fan-in scaled initialization (no training).")
      .def_property_readonly("n_measurements", &Model::n_measurements)
      .def_property_readonly("n_classes", &Model::n_classes)
      .def_property_readonly("scene_side", &Model::scene_side)
      .def_property_readonly("modulation", &Model::modulation)
      .def("encode", &Model::encode, py::arg("scene"))
      .def("forward", &Model::forward, py::arg("scene"))
      .def("infer_from_measurements", &Model::infer_from_measurements, py::arg("measurements"))
      .def("patterns", &Model::patterns)
      .def("save", &Model::save, py::arg("path"));

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
