#pragma once

#include "relcast/config.hpp"
#include "relcast/decoder.hpp"
#include "relcast/metrics.hpp"

namespace relcast {

/// Per-agent supervision targets. Agents whose ground-truth future leaves
/// the lane-graph margin (or is missing) are fully unsupervised but still
/// participate in the graphs.
struct SupervisionMask {
  bool goal_supervised = false;
  bool traj_supervised = false;
  int64_t target_node = -1;  // nearest map node to the GT endpoint
  Vec2 target_offset;        // GT endpoint in that node's frame
  Tensor target_waypoints;   // [future_len x 2], agent frame
  int64_t future_len = 0;
};

std::vector<SupervisionMask> make_targets(const Scenario& s, const LaneGraph& g,
                                          const TrainConfig& cfg);

/// Conditioning goal for trajectory completion during training: the GT goal
/// when present, otherwise the most likely predicted goal (gradients never
/// flow through the conditioning point).
Vec2 teacher_force_goal(const SupervisionMask& mask, const AgentTrack& track,
                        const GoalField& field, int64_t agent_index, const LaneGraph& g);

/// Scale augmentation: all coordinates, speeds and box sizes multiplied by a
/// factor; headings untouched. (No rotation/translation augmentation exists
/// anywhere in this codebase; the encoders are already viewpoint-invariant.)
Scenario scale_augment(const Scenario& s, double factor);

/// Unnormalized per-scenario loss sums plus supervised-agent counts; batch
/// normalization divides by the batch-wide counts so repeated backward calls
/// accumulate the exact batch-mean gradient.
struct ScenarioLossSums {
  ad::Var goal_cls;  // scalar sums (undefined when the count is zero)
  ad::Var goal_reg;
  ad::Var traj;
  int64_t n_goal = 0;
  int64_t n_traj = 0;
};

ScenarioLossSums scenario_loss_sums(const Model& m, const Scenario& s, const LaneGraph& g,
                                    const std::vector<SupervisionMask>& masks,
                                    const TrainConfig& cfg);

struct LossBreakdown {
  double total = 0.0;
  double goal_cls = 0.0;
  double goal_reg = 0.0;
  double traj = 0.0;
  int64_t n_goal = 0;
  int64_t n_traj = 0;
};

/// Weighted combination with per-term averaging over supervised agents.
/// Returns value-level numbers (for logging/tests); gradients are produced
/// by backward() on the weighted per-scenario expression inside train().
LossBreakdown batch_loss(const Model& m, const std::vector<Scenario>& batch,
                         const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0, goal_cls = 0.0, goal_reg = 0.0, traj = 0.0;
  bool evaluated = false;
  MetricValues eval;
};

struct TrainResult {
  std::vector<EpochStats> history;
  bool diverged = false;
  int completed_epochs = 0;
};

/// Epoch loop with Adam + step-decay scheduler, per-epoch checkpointing to
/// `checkpoint_path`, and periodic holdout evaluation. A non-finite loss
/// aborts and leaves the last good epoch's weights in the model and on disk.
TrainResult train(Model& m, const std::vector<Scenario>& train_set,
                  const std::vector<Scenario>& holdout, const TrainConfig& cfg,
                  const std::string& checkpoint_path, bool verbose = false);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace relcast
