#pragma once

#include <string>

#include "relcast/model.hpp"

namespace relcast {

/// Training hyperparameters. Defaults follow the published recipe where one
/// exists (loss weights 1.0, focal gamma 2.0, scheduler 0.25/15, scale
/// augmentation 0.8..1.2, 10 m supervision margin); epoch and batch defaults
/// are desk-scale.
struct TrainConfig {
  double w_goal_cls = 1.0;
  double w_goal_reg = 1.0;
  double w_traj = 1.0;
  double focal_gamma = 2.0;
  double huber_delta = 1.0;
  double lr = 5e-4;
  double lr_decay = 0.25;
  int lr_step = 15;
  int epochs = 30;
  int batch_size = 8;
  bool augment_scale = true;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double supervision_margin = 10.0;  // meters from the lane graph
  double holdout_frac = 0.1;
  int eval_every = 5;
  uint64_t seed = 1;

  void validate() const;
};

// JSON (de)serialization; missing keys keep defaults, unknown keys throw.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

/// Config file with optional "model" and "train" sections.
struct FileConfig {
  ModelConfig model;
  TrainConfig train;
};
FileConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const FileConfig& cfg);

}  // namespace relcast
