#pragma once

#include <nlohmann/json.hpp>

#include "spixseg/nn/model.hpp"
#include "spixseg/training.hpp"

namespace spixseg::nn {

inline void to_json(nlohmann::json& j, const FsrcnnSpec& s) {
  j = {{"d", s.d},
       {"s", s.s},
       {"m", s.m},
       {"k_extract", s.k_extract},
       {"k_shrink", s.k_shrink},
       {"k_map", s.k_map},
       {"k_expand", s.k_expand},
       {"k_deconv", s.k_deconv}};
}

inline void from_json(const nlohmann::json& j, FsrcnnSpec& s) {
  s.d = j.value("d", 56);
  s.s = j.value("s", 12);
  s.m = j.value("m", 4);
  s.k_extract = j.value("k_extract", 5);
  s.k_shrink = j.value("k_shrink", 1);
  s.k_map = j.value("k_map", 3);
  s.k_expand = j.value("k_expand", 1);
  s.k_deconv = j.value("k_deconv", 9);
}

inline void to_json(nlohmann::json& j, const HeadSpec& s) {
  j = {{"levels", s.levels}, {"base", s.base}};
}

inline void from_json(const nlohmann::json& j, HeadSpec& s) {
  s.levels = j.value("levels", 2);
  s.base = j.value("base", 32);
}

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"n_measurements", c.n_measurements},
       {"scene_h", c.scene_h},
       {"scene_w", c.scene_w},
       {"n_classes", c.n_classes},
       {"fsrcnn", c.fsrcnn},
       {"head", c.head},
       {"class_names", c.class_names}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.n_measurements = j.value("n_measurements", 40);
  c.scene_h = j.value("scene_h", 64);
  c.scene_w = j.value("scene_w", 64);
  c.n_classes = j.value("n_classes", 3);
  if (j.contains("fsrcnn")) j.at("fsrcnn").get_to(c.fsrcnn);
  if (j.contains("head")) j.at("head").get_to(c.head);
  if (j.contains("class_names")) {
    c.class_names = j.at("class_names").get<std::vector<std::string>>();
  } else if (c.n_classes == 3) {
    c.class_names = {"background", "cytoplasm", "nucleus"};
  } else {
    c.class_names.clear();
    for (int i = 0; i < c.n_classes; ++i) c.class_names.push_back("class" + std::to_string(i));
  }
}

}  // namespace spixseg::nn

namespace spixseg {

inline void to_json(nlohmann::json& j, const StageConfig& s) {
  j = {{"lr0", s.lr0}, {"decay", s.decay}, {"decay_every", s.decay_every}, {"epochs", s.epochs}};
}

inline void from_json(const nlohmann::json& j, StageConfig& s) {
  s.lr0 = j.value("lr0", s.lr0);
  s.decay = j.value("decay", s.decay);
  s.decay_every = j.value("decay_every", s.decay_every);
  s.epochs = j.value("epochs", s.epochs);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"stage1", c.stage1},
       {"stage2", c.stage2},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("stage1")) j.at("stage1").get_to(c.stage1);
  if (j.contains("stage2")) j.at("stage2").get_to(c.stage2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
}

}  // namespace spixseg
