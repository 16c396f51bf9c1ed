#include "relcast/training.hpp"

#include "relcast/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

namespace relcast {

std::vector<SupervisionMask> make_targets(const Scenario& s, const LaneGraph& g,
                                          const TrainConfig& cfg) {
  if (g.node_count() == 0) throw std::invalid_argument("make_targets: empty lane graph");
  const Domain domain = Domain::from_name(s.domain);
  const int horizon = domain.future_len();

  std::vector<SupervisionMask> out;
  out.reserve(s.agents.size());
  for (const auto& agent : s.agents) {
    SupervisionMask m;
    m.future_len = static_cast<int64_t>(agent.future.size());

    // any step drifting beyond the margin drops the agent from every term
    bool within_margin = true;
    for (const auto& w : agent.future) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& node : g.nodes) best = std::min(best, (node.pose.c - w).norm());
      within_margin = within_margin && best <= cfg.supervision_margin;
    }

    m.traj_supervised = within_margin && m.future_len >= 1;
    m.goal_supervised = within_margin && static_cast<int>(agent.future.size()) == horizon;

    if (m.goal_supervised) {
      const Vec2 goal = agent.future.back();
      int64_t best = 0;
      double best_d = (g.nodes[0].pose.c - goal).norm();
      for (int64_t i = 1; i < g.node_count(); ++i) {
        const double d = (g.nodes[static_cast<size_t>(i)].pose.c - goal).norm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      m.target_node = best;
      m.target_offset = world_to_node_frame(g.nodes[static_cast<size_t>(best)].pose, goal);
    }
    if (m.traj_supervised) {
      m.target_waypoints = Tensor::zeros({m.future_len, 2});
      const Pose2& p0 = agent.current_pose();
      for (int64_t i = 0; i < m.future_len; ++i) {
        const Vec2 local = world_to_node_frame(p0, agent.future[static_cast<size_t>(i)]);
        m.target_waypoints.set(i, 0, local.x);
        m.target_waypoints.set(i, 1, local.y);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

Vec2 teacher_force_goal(const SupervisionMask& mask, const AgentTrack& track,
                        const GoalField& field, int64_t agent_index, const LaneGraph& g) {
  if (mask.goal_supervised) return track.future.back();
  // weak teacher: most likely predicted goal, read as plain values
  const auto probs = field.agent_probs(agent_index);
  const int64_t best = static_cast<int64_t>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
  const int64_t row = agent_index * field.n_map_nodes + best;
  const Vec2 offset{field.offsets.value().at(row, 0), field.offsets.value().at(row, 1)};
  return node_frame_to_world(g.nodes[static_cast<size_t>(best)].pose, offset);
}

Scenario scale_augment(const Scenario& s, double factor) { return scale(s, factor); }

ScenarioLossSums scenario_loss_sums(const Model& m, const Scenario& s, const LaneGraph& g,
                                    const std::vector<SupervisionMask>& masks,
                                    const TrainConfig& cfg) {
  ad::Var map_emb = encode_lane_graph(m, g);
  ad::Var agent_emb = encode_history(m, s.agents);
  HeteroGraph scene_graph = assemble_scene_graph(m, s.agents, g, agent_emb, map_emb);
  SceneEmbedding scene = encode_scene(m, scene_graph);
  HeteroGraph goal_graph = build_goal_graph(m, s.agents, g, scene);
  GoalPrediction pred = predict_goals(m, goal_graph);

  const int64_t n_map = pred.field.n_map_nodes;
  ScenarioLossSums sums;
  std::vector<ad::Var> cls_terms, reg_terms, traj_terms;

  for (int64_t a = 0; a < static_cast<int64_t>(s.agents.size()); ++a) {
    const auto& mask = masks[static_cast<size_t>(a)];
    if (mask.goal_supervised) {
      // the agent's component logits come as [M x 1]; focal loss wants rank-1
      ad::Var component =
          ad::reshape(ad::slice_rows(pred.field.logits, a * n_map, n_map), {n_map});
      cls_terms.push_back(
          ad::softmax_focal_loss(component, mask.target_node, cfg.focal_gamma));
      ad::Var offset_row = ad::slice_rows(pred.field.offsets, a * n_map + mask.target_node, 1);
      Tensor target = Tensor::of({1, 2}, {mask.target_offset.x, mask.target_offset.y});
      reg_terms.push_back(ad::huber(offset_row, target.to(offset_row.value().dtype()),
                                    cfg.huber_delta));
      ++sums.n_goal;
    }
    if (mask.traj_supervised) {
      const Vec2 goal = teacher_force_goal(mask, s.agents[static_cast<size_t>(a)], pred.field,
                                           a, g);
      ad::Var rows = complete_trajectory(m, ad::slice_rows(pred.actor_features, a, 1),
                                         s.agents[static_cast<size_t>(a)].current_pose(),
                                         {goal});
      ad::Var pred_prefix = ad::slice_cols(rows, 0, 2 * mask.future_len);
      Tensor target = mask.target_waypoints.reshaped({1, 2 * mask.future_len});
      traj_terms.push_back(
          ad::huber(pred_prefix, target.to(pred_prefix.value().dtype()), cfg.huber_delta));
      ++sums.n_traj;
    }
  }

  auto sum_scalars = [](std::vector<ad::Var>& terms) -> ad::Var {
    if (terms.empty()) return ad::Var{};
    ad::Var acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return acc;
  };
  sums.goal_cls = sum_scalars(cls_terms);
  sums.goal_reg = sum_scalars(reg_terms);
  sums.traj = sum_scalars(traj_terms);
  return sums;
}

LossBreakdown batch_loss(const Model& m, const std::vector<Scenario>& batch,
                         const TrainConfig& cfg) {
  ad::NoGradGuard eval_only;
  LossBreakdown out;
  for (const auto& s : batch) {
    const Domain domain = Domain::from_name(s.domain);
    LaneGraph g = build_lane_graph(s.map, domain.sample_interval);
    add_conflict_edges(g, m.cfg.conflict_radius);
    const auto masks = make_targets(s, g, cfg);
    const auto sums = scenario_loss_sums(m, s, g, masks, cfg);
    if (sums.goal_cls.defined()) out.goal_cls += sums.goal_cls.value().at(0);
    if (sums.goal_reg.defined()) out.goal_reg += sums.goal_reg.value().at(0);
    if (sums.traj.defined()) out.traj += sums.traj.value().at(0);
    out.n_goal += sums.n_goal;
    out.n_traj += sums.n_traj;
  }
  if (out.n_goal > 0) {
    out.goal_cls /= static_cast<double>(out.n_goal);
    out.goal_reg /= static_cast<double>(out.n_goal);
  }
  if (out.n_traj > 0) out.traj /= static_cast<double>(out.n_traj);
  out.total = cfg.w_goal_cls * out.goal_cls + cfg.w_goal_reg * out.goal_reg +
              cfg.w_traj * out.traj;
  return out;
}

namespace {

MetricValues evaluate_holdout(const Model& m, const std::vector<Scenario>& holdout) {
  std::vector<MetricValues> rows;
  for (const auto& s : holdout) rows.push_back(scenario_metrics(forecast(m, s), s));
  return aggregate(rows);
}

}  // namespace

TrainResult train(Model& m, const std::vector<Scenario>& train_set,
                  const std::vector<Scenario>& holdout, const TrainConfig& cfg,
                  const std::string& checkpoint_path, bool verbose) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  Rng rng(cfg.seed);
  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  m.save(checkpoint_path, /*include_optimizer_state=*/true);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = ad::scheduled_lr(cfg.lr, epoch, cfg.lr_decay, cfg.lr_step);
    // deterministic shuffle
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(rng.below(i))]);

    double ep_cls = 0, ep_reg = 0, ep_traj = 0;
    int64_t ep_goal_n = 0, ep_traj_n = 0;

    try {
      for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch_size)) {
        const size_t b_end = std::min(order.size(), b + static_cast<size_t>(cfg.batch_size));

        // materialize the augmented batch with its graphs and masks first so
        // the per-term batch denominators are known before any backward
        struct Item {
          Scenario s;
          LaneGraph g;
          std::vector<SupervisionMask> masks;
        };
        std::vector<Item> items;
        int64_t n_goal = 0, n_traj = 0;
        for (size_t i = b; i < b_end; ++i) {
          Item item;
          item.s = train_set[order[i]];
          if (cfg.augment_scale)
            item.s = scale_augment(item.s, rng.uniform(cfg.scale_min, cfg.scale_max));
          const Domain domain = Domain::from_name(item.s.domain);
          item.g = build_lane_graph(item.s.map, domain.sample_interval);
          add_conflict_edges(item.g, m.cfg.conflict_radius);
          item.masks = make_targets(item.s, item.g, cfg);
          for (const auto& mask : item.masks) {
            n_goal += mask.goal_supervised ? 1 : 0;
            n_traj += mask.traj_supervised ? 1 : 0;
          }
          items.push_back(std::move(item));
        }
        if (n_goal == 0 && n_traj == 0) {
          if (verbose)
            std::cerr << "warning: batch with no supervised agents, skipping step\n";
          continue;
        }

        m.params.zero_grad();
        for (const auto& item : items) {
          auto sums = scenario_loss_sums(m, item.s, item.g, item.masks, cfg);
          std::vector<ad::Var> parts;
          if (sums.goal_cls.defined() && n_goal > 0) {
            parts.push_back(ad::scale(sums.goal_cls,
                                      cfg.w_goal_cls / static_cast<double>(n_goal)));
            parts.push_back(ad::scale(sums.goal_reg,
                                      cfg.w_goal_reg / static_cast<double>(n_goal)));
          }
          if (sums.traj.defined() && n_traj > 0)
            parts.push_back(ad::scale(sums.traj, cfg.w_traj / static_cast<double>(n_traj)));
          if (parts.empty()) continue;
          ad::Var loss = parts[0];
          for (size_t p = 1; p < parts.size(); ++p) loss = ad::add(loss, parts[p]);
          ad::backward(loss);

          if (sums.goal_cls.defined()) ep_cls += sums.goal_cls.value().at(0);
          if (sums.goal_reg.defined()) ep_reg += sums.goal_reg.value().at(0);
          if (sums.traj.defined()) ep_traj += sums.traj.value().at(0);
        }
        ep_goal_n += n_goal;
        ep_traj_n += n_traj;
        m.params.adamStep(lr);
      }
    } catch (const std::runtime_error& e) {
      // divergence: restore the last completed epoch in place and stop
      if (verbose) std::cerr << "training aborted: " << e.what() << "\n";
      restore(m.params, load_checkpoint(checkpoint_path));
      result.diverged = true;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.goal_cls = ep_goal_n > 0 ? ep_cls / static_cast<double>(ep_goal_n) : 0.0;
    stats.goal_reg = ep_goal_n > 0 ? ep_reg / static_cast<double>(ep_goal_n) : 0.0;
    stats.traj = ep_traj_n > 0 ? ep_traj / static_cast<double>(ep_traj_n) : 0.0;
    stats.loss = cfg.w_goal_cls * stats.goal_cls + cfg.w_goal_reg * stats.goal_reg +
                 cfg.w_traj * stats.traj;
    if (!holdout.empty() &&
        (epoch % cfg.eval_every == cfg.eval_every - 1 || epoch == cfg.epochs - 1)) {
      stats.evaluated = true;
      stats.eval = evaluate_holdout(m, holdout);
    }
    if (verbose)
      std::cerr << "epoch " << epoch << " lr " << lr << " loss " << stats.loss << "\n";
    result.history.push_back(stats);
    result.completed_epochs = epoch + 1;
    m.save(checkpoint_path, /*include_optimizer_state=*/true);
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open history csv: " + path);
  os << "epoch,lr,loss,goal_cls,goal_reg,traj,evaluated," << metrics_csv_header() << "\n";
  os.precision(17);
  for (const auto& h : history) {
    os << h.epoch << ',' << h.lr << ',' << h.loss << ',' << h.goal_cls << ',' << h.goal_reg
       << ',' << h.traj << ',' << (h.evaluated ? 1 : 0) << ',' << metrics_csv_row(h.eval)
       << "\n";
  }
}

}  // namespace relcast
