// relcast command-line: dataset generation, training, evaluation,
// prediction, map-embedding caching, and the benchmark/sweep harnesses.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "relcast/checkpoint.hpp"
#include "relcast/config.hpp"
#include "relcast/generator.hpp"
#include "relcast/harness.hpp"
#include "relcast/map_cache.hpp"
#include "relcast/training.hpp"

namespace rc = relcast;

namespace {

std::vector<rc::MapTemplateKind> parse_templates(const std::string& spec) {
  if (spec == "mixed")
    return {rc::MapTemplateKind::straight,     rc::MapTemplateKind::curve,
            rc::MapTemplateKind::fork,         rc::MapTemplateKind::merge,
            rc::MapTemplateKind::intersection, rc::MapTemplateKind::crosswalk_street};
  std::vector<rc::MapTemplateKind> kinds;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) kinds.push_back(rc::map_template_from(item));
  return kinds;
}

rc::FileConfig load_or_default(const std::string& path) {
  if (path.empty()) return {};
  return rc::load_config_file(path);
}

void split_holdout(std::vector<rc::Scenario>& all, double frac,
                   std::vector<rc::Scenario>& train, std::vector<rc::Scenario>& holdout) {
  const size_t n_hold = static_cast<size_t>(frac * static_cast<double>(all.size()));
  const size_t n_train = all.size() - n_hold;
  train.assign(all.begin(), all.begin() + static_cast<long>(n_train));
  holdout.assign(all.begin() + static_cast<long>(n_train), all.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viewpoint-invariant multi-agent motion forecasting"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, model_path, map_path, cache_path;
  uint64_t seed = 1;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic scenario dataset");
  std::string tpl_spec = "mixed", domain_name = "urban";
  int count = 100, agents = 3;
  double fork_prior = 0.5, truncate_frac = 0.0, late_frac = 0.0;
  gen->add_option("--template", tpl_spec,
                  "template kind(s), comma-separated or 'mixed'");
  gen->add_option("--count", count, "number of scenarios");
  gen->add_option("--agents", agents, "max agents per scenario");
  gen->add_option("--domain", domain_name, "urban | highway");
  gen->add_option("--fork-prior", fork_prior, "probability of the branching choice");
  gen->add_option("--truncate-frac", truncate_frac, "agents with short futures");
  gen->add_option("--late-frac", late_frac, "agents with partial histories");
  gen->add_option("--seed", seed, "rng seed");
  gen->add_option("--out", out_path, "output .jsonl path")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  tr->add_option("--data", data_path, "training dataset .jsonl")->required();
  tr->add_option("--config", config_path, "json config file (model + train sections)");
  tr->add_option("--seed", seed, "overrides config seeds");
  tr->add_option("--out", out_path, "output directory")->required();
  bool verbose = false;
  tr->add_flag("--verbose", verbose, "log per-epoch progress");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->add_option("--model", model_path, "checkpoint path")->required();
  ev->add_option("--data", data_path, "dataset .jsonl")->required();
  ev->add_option("--out", out_path, "metrics json output");
  ev->add_option("--seed", seed, "rng seed (unused, accepted for uniformity)");

  // predict
  auto* pr = app.add_subcommand("predict", "write forecasts for a dataset");
  pr->add_option("--model", model_path, "checkpoint path")->required();
  pr->add_option("--data", data_path, "dataset .jsonl")->required();
  pr->add_option("--map-cache", cache_path, "optional map-embedding cache");
  pr->add_option("--out", out_path, "forecast .jsonl output")->required();
  pr->add_option("--seed", seed, "rng seed (unused, accepted for uniformity)");

  // cache-map
  auto* cm = app.add_subcommand("cache-map", "compute and store map embeddings offline");
  cm->add_option("--model", model_path, "checkpoint path")->required();
  cm->add_option("--map", map_path, "map .jsonl (one entity per line)")->required();
  cm->add_option("--domain", domain_name, "urban | highway (sampling interval)");
  cm->add_option("--out", out_path, "cache file output")->required();

  // bench-runtime
  auto* br = app.add_subcommand("bench-runtime", "encoder runtime scaling benchmark");
  br->add_option("--config", config_path, "json config file");
  int trials = 20, fixed_nodes = 250, fixed_agents = 40;
  br->add_option("--trials", trials, "timing trials per point (median reported)");
  br->add_option("--fixed-nodes", fixed_nodes, "map nodes for the agent sweep");
  br->add_option("--fixed-agents", fixed_agents, "agents for the node sweep");
  br->add_option("--seed", seed, "rng seed");
  br->add_option("--out", out_path, "csv output")->required();

  // sweep-viewpoint
  auto* sv = app.add_subcommand("sweep-viewpoint", "rotation-bucket sensitivity sweep");
  sv->add_option("--model", model_path, "checkpoint path")->required();
  sv->add_option("--data", data_path, "dataset .jsonl")->required();
  int buckets = 8;
  sv->add_option("--buckets", buckets, "rotation buckets");
  sv->add_option("--seed", seed, "rng seed");
  sv->add_option("--out", out_path, "csv output")->required();

  // sample-efficiency
  auto* se = app.add_subcommand("sample-efficiency",
                                "training-set-size curve, full model vs ablation");
  se->add_option("--data", data_path, "dataset .jsonl")->required();
  se->add_option("--config", config_path, "json config file");
  std::string fractions_spec = "0.1,0.25,0.5,1.0";
  se->add_option("--fractions", fractions_spec, "comma-separated fractions");
  se->add_option("--seed", seed, "overrides config seeds");
  se->add_option("--out", out_path, "csv output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      rc::BehaviorMix mix;
      mix.fork_left_prior = fork_prior;
      mix.truncate_frac = truncate_frac;
      mix.late_appear_frac = late_frac;
      auto scenarios = rc::generate_dataset(parse_templates(tpl_spec),
                                            rc::Domain::from_name(domain_name), count, agents,
                                            mix, seed);
      rc::write_scenarios_jsonl(out_path, scenarios);
      std::cout << "wrote " << scenarios.size() << " scenarios to " << out_path << "\n";
    } else if (*tr) {
      rc::FileConfig cfg = load_or_default(config_path);
      if (tr->count("--seed")) {
        cfg.model.seed = seed;
        cfg.train.seed = seed;
      }
      auto all = rc::read_scenarios_jsonl(data_path);
      if (!all.empty())
        cfg.model.t_future = rc::Domain::from_name(all[0].domain).future_len();
      std::vector<rc::Scenario> train_set, holdout;
      split_holdout(all, cfg.train.holdout_frac, train_set, holdout);
      std::filesystem::create_directories(out_path);
      rc::Model model(cfg.model);
      auto result = rc::train(model, train_set, holdout, cfg.train,
                              out_path + "/model.ckpt", verbose);
      rc::write_history_csv(out_path + "/history.csv", result.history);
      rc::save_config_file(out_path + "/config.json", cfg);
      if (result.diverged) {
        std::cerr << "training diverged; last good checkpoint kept\n";
        return 2;
      }
      std::cout << "trained " << result.completed_epochs << " epochs -> " << out_path
                << "/model.ckpt\n";
    } else if (*ev) {
      rc::Model model = rc::Model::from_checkpoint(model_path);
      auto scenarios = rc::read_scenarios_jsonl(data_path);
      const rc::MetricValues v = rc::evaluate_model(model, scenarios);
      const std::string text = rc::metrics_to_json(v);
      if (out_path.empty()) {
        std::cout << text << "\n";
      } else {
        std::ofstream os(out_path, std::ios::trunc);
        os << text << "\n";
      }
    } else if (*pr) {
      rc::Model model = rc::Model::from_checkpoint(model_path);
      std::ofstream os(out_path, std::ios::trunc);
      if (!os) throw std::runtime_error("cannot open output: " + out_path);
      rc::ScenarioReader reader(data_path);
      size_t n = 0;
      while (auto s = reader.next()) {
        rc::ForecastOptions opt;
        const rc::Domain domain = rc::Domain::from_name(s->domain);
        rc::LaneGraph g = rc::build_lane_graph(s->map, domain.sample_interval);
        rc::add_conflict_edges(g, model.cfg.conflict_radius);
        if (!cache_path.empty()) {
          auto cached =
              rc::cache_load(cache_path, g, rc::fnv1a64_file(model_path));
          if (cached) opt.cached_map_embeddings = std::move(*cached);
        }
        rc::write_forecasts_jsonl(os, s->id, rc::forecast(model, *s, g, opt));
        ++n;
      }
      std::cout << "wrote forecasts for " << n << " scenarios to " << out_path << "\n";
    } else if (*cm) {
      rc::Model model = rc::Model::from_checkpoint(model_path);
      rc::MapSource map = rc::read_map_jsonl(map_path);
      const rc::Domain domain = rc::Domain::from_name(domain_name);
      rc::LaneGraph g = rc::build_lane_graph(map, domain.sample_interval);
      rc::add_conflict_edges(g, model.cfg.conflict_radius);
      rc::ad::NoGradGuard inference;
      const rc::Tensor emb = rc::encode_lane_graph(model, g).value();
      rc::cache_store(out_path, g, emb, rc::fnv1a64_file(model_path));
      std::cout << "cached " << emb.rows() << " node embeddings to " << out_path << "\n";
    } else if (*br) {
      rc::FileConfig cfg = load_or_default(config_path);
      cfg.model.t_future = rc::Domain::highway().future_len();
      rc::Model model(cfg.model);
      auto result = rc::runtime_bench(model, {1, 2, 5, 10, 20, 40}, {10, 50, 100, 250},
                                      fixed_nodes, fixed_agents, trials, seed);
      rc::write_bench_csv(out_path, result);
      std::cout << "wrote runtime table to " << out_path << "\n";
    } else if (*sv) {
      rc::Model model = rc::Model::from_checkpoint(model_path);
      auto scenarios = rc::read_scenarios_jsonl(data_path);
      auto result = rc::viewpoint_sweep(model, scenarios, buckets, seed);
      rc::write_sweep_csv(out_path, result);
      std::cout << "mean BrierMinFDE@6 " << result.mean_brier_fde6 << ", cross-bucket variance "
                << result.variance_brier_fde6 << "\n";
    } else if (*se) {
      rc::FileConfig cfg = load_or_default(config_path);
      if (se->count("--seed")) {
        cfg.model.seed = seed;
        cfg.train.seed = seed;
      }
      auto all = rc::read_scenarios_jsonl(data_path);
      if (!all.empty())
        cfg.model.t_future = rc::Domain::from_name(all[0].domain).future_len();
      std::vector<rc::Scenario> train_set, holdout;
      split_holdout(all, cfg.train.holdout_frac, train_set, holdout);
      std::vector<double> fractions;
      std::stringstream ss(fractions_spec);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) fractions.push_back(std::stod(item));
      const std::string work_dir =
          std::filesystem::path(out_path).parent_path().empty()
              ? "."
              : std::filesystem::path(out_path).parent_path().string();
      auto rows = rc::sample_efficiency(cfg.model, cfg.train, train_set, holdout, fractions,
                                        work_dir);
      rc::write_efficiency_csv(out_path, rows);
      std::cout << "wrote efficiency curve to " << out_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
