#include "relcast/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace relcast {

using nlohmann::json;

void SamplerConfig::validate() const {
  if (k_modes < 1) throw std::invalid_argument("sampler: k_modes must be >= 1");
  if (!(down_radius > hard_radius && hard_radius > 0.0))
    throw std::invalid_argument("sampler: need down_radius > hard_radius > 0");
  if (down_factor <= 1.0) throw std::invalid_argument("sampler: down_factor must exceed 1");
}

void ModelConfig::validate() const {
  if (hidden < 1 || attr_dim < 1) throw std::invalid_argument("model: bad widths");
  if (n_freq < 1) throw std::invalid_argument("model: n_freq must be >= 1");
  if (freq_sign != 1 && freq_sign != -1)
    throw std::invalid_argument("model: freq_sign must be +1 or -1");
  if (lane_layers < 1 || scene_layers < 1 || goal_layers < 1)
    throw std::invalid_argument("model: every stage needs at least one layer");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    throw std::invalid_argument("model: conv kernel must be odd");
  if (t_future < 1) throw std::invalid_argument("model: t_future must be >= 1");
  if (a2a_radius <= 0.0 || conflict_radius <= 0.0)
    throw std::invalid_argument("model: radii must be positive");
  sampler.validate();
}

void TrainConfig::validate() const {
  if (w_goal_cls < 0 || w_goal_reg < 0 || w_traj < 0)
    throw std::invalid_argument("train: loss weights must be >= 0");
  if (focal_gamma < 0) throw std::invalid_argument("train: focal gamma must be >= 0");
  if (!(scale_min > 0 && scale_min <= scale_max))
    throw std::invalid_argument("train: need 0 < scale_min <= scale_max");
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("train: bad loop sizes");
  if (lr <= 0 || huber_delta <= 0) throw std::invalid_argument("train: bad lr or delta");
  if (holdout_frac < 0 || holdout_frac >= 1)
    throw std::invalid_argument("train: holdout_frac must be in [0, 1)");
}

namespace {

template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_known(const json& j, std::initializer_list<const char*> keys,
                 const std::string& section) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || (k == key);
    if (!known) throw std::invalid_argument("config: unknown key '" + k + "' in " + section);
  }
}

json sampler_to_json(const SamplerConfig& s) {
  return {{"k_modes", s.k_modes},
          {"hard_radius", s.hard_radius},
          {"down_radius", s.down_radius},
          {"down_factor", s.down_factor}};
}

SamplerConfig sampler_from_json(const json& j) {
  SamplerConfig s;
  check_known(j, {"k_modes", "hard_radius", "down_radius", "down_factor"}, "sampler");
  pick(j, "k_modes", s.k_modes);
  pick(j, "hard_radius", s.hard_radius);
  pick(j, "down_radius", s.down_radius);
  pick(j, "down_factor", s.down_factor);
  return s;
}

json model_to_json_obj(const ModelConfig& cfg) {
  return {{"hidden", cfg.hidden},
          {"attr_dim", cfg.attr_dim},
          {"n_freq", cfg.n_freq},
          {"freq_sign", cfg.freq_sign},
          {"lane_layers", cfg.lane_layers},
          {"scene_layers", cfg.scene_layers},
          {"goal_layers", cfg.goal_layers},
          {"conv_kernel", cfg.conv_kernel},
          {"a2a_radius", cfg.a2a_radius},
          {"conflict_radius", cfg.conflict_radius},
          {"use_pairpose", cfg.use_pairpose},
          {"dtype", cfg.dtype == Dtype::f32 ? "f32" : "f64"},
          {"t_future", cfg.t_future},
          {"sampler", sampler_to_json(cfg.sampler)},
          {"seed", cfg.seed}};
}

ModelConfig model_from_json_obj(const json& j) {
  ModelConfig cfg;
  check_known(j,
              {"hidden", "attr_dim", "n_freq", "freq_sign", "lane_layers", "scene_layers",
               "goal_layers", "conv_kernel", "a2a_radius", "conflict_radius", "use_pairpose",
               "dtype", "t_future", "sampler", "seed"},
              "model");
  pick(j, "hidden", cfg.hidden);
  pick(j, "attr_dim", cfg.attr_dim);
  pick(j, "n_freq", cfg.n_freq);
  pick(j, "freq_sign", cfg.freq_sign);
  pick(j, "lane_layers", cfg.lane_layers);
  pick(j, "scene_layers", cfg.scene_layers);
  pick(j, "goal_layers", cfg.goal_layers);
  pick(j, "conv_kernel", cfg.conv_kernel);
  pick(j, "a2a_radius", cfg.a2a_radius);
  pick(j, "conflict_radius", cfg.conflict_radius);
  pick(j, "use_pairpose", cfg.use_pairpose);
  if (j.contains("dtype")) {
    const std::string dt = j.at("dtype").get<std::string>();
    if (dt == "f32")
      cfg.dtype = Dtype::f32;
    else if (dt == "f64")
      cfg.dtype = Dtype::f64;
    else
      throw std::invalid_argument("config: dtype must be f32 or f64");
  }
  pick(j, "t_future", cfg.t_future);
  if (j.contains("sampler")) cfg.sampler = sampler_from_json(j.at("sampler"));
  pick(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

json train_to_json_obj(const TrainConfig& cfg) {
  return {{"w_goal_cls", cfg.w_goal_cls},
          {"w_goal_reg", cfg.w_goal_reg},
          {"w_traj", cfg.w_traj},
          {"focal_gamma", cfg.focal_gamma},
          {"huber_delta", cfg.huber_delta},
          {"lr", cfg.lr},
          {"lr_decay", cfg.lr_decay},
          {"lr_step", cfg.lr_step},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"augment_scale", cfg.augment_scale},
          {"scale_min", cfg.scale_min},
          {"scale_max", cfg.scale_max},
          {"supervision_margin", cfg.supervision_margin},
          {"holdout_frac", cfg.holdout_frac},
          {"eval_every", cfg.eval_every},
          {"seed", cfg.seed}};
}

TrainConfig train_from_json_obj(const json& j) {
  TrainConfig cfg;
  check_known(j,
              {"w_goal_cls", "w_goal_reg", "w_traj", "focal_gamma", "huber_delta", "lr",
               "lr_decay", "lr_step", "epochs", "batch_size", "augment_scale", "scale_min",
               "scale_max", "supervision_margin", "holdout_frac", "eval_every", "seed"},
              "train");
  pick(j, "w_goal_cls", cfg.w_goal_cls);
  pick(j, "w_goal_reg", cfg.w_goal_reg);
  pick(j, "w_traj", cfg.w_traj);
  pick(j, "focal_gamma", cfg.focal_gamma);
  pick(j, "huber_delta", cfg.huber_delta);
  pick(j, "lr", cfg.lr);
  pick(j, "lr_decay", cfg.lr_decay);
  pick(j, "lr_step", cfg.lr_step);
  pick(j, "epochs", cfg.epochs);
  pick(j, "batch_size", cfg.batch_size);
  pick(j, "augment_scale", cfg.augment_scale);
  pick(j, "scale_min", cfg.scale_min);
  pick(j, "scale_max", cfg.scale_max);
  pick(j, "supervision_margin", cfg.supervision_margin);
  pick(j, "holdout_frac", cfg.holdout_frac);
  pick(j, "eval_every", cfg.eval_every);
  pick(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return model_to_json_obj(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  return model_from_json_obj(json::parse(text));
}

std::string train_config_to_json(const TrainConfig& cfg) { return train_to_json_obj(cfg).dump(); }

TrainConfig train_config_from_json(const std::string& text) {
  return train_from_json_obj(json::parse(text));
}

FileConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(is);
  check_known(j, {"model", "train"}, "config root");
  FileConfig out;
  if (j.contains("model")) out.model = model_from_json_obj(j.at("model"));
  if (j.contains("train")) out.train = train_from_json_obj(j.at("train"));
  return out;
}

void save_config_file(const std::string& path, const FileConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open config file for writing: " + path);
  json j;
  j["model"] = model_to_json_obj(cfg.model);
  j["train"] = train_to_json_obj(cfg.train);
  os << j.dump(2) << '\n';
}

}  // namespace relcast
