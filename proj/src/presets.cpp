#include "masq/presets.hpp"

#include <cmath>

namespace masq {

std::vector<std::uint64_t> seed_list(int n_seeds) {
  std::vector<std::uint64_t> seeds;
  for (int i = 1; i <= n_seeds; ++i) seeds.push_back(std::uint64_t(i));
  return seeds;
}

EnvModel make_rover_env(RewardField terrain, double size_m) {
  EnvModel env;
  env.dim = 2;
  env.bounds = {Vec(0.0, 0.0), Vec(size_m, size_m)};
  env.actions = {Vec(0.0, 1.0), Vec(0.0, -1.0), Vec(-1.0, 0.0), Vec(1.0, 0.0)};
  env.noise_var = 0.1;
  env.boundary = Boundary::wrap;
  env.unsafe_joint = {JointUnsafeSpec::Kind::min_pairwise_distance, 0.1};
  env.reward_field = std::move(terrain);
  env.obs_noise_std = 0.1;
  env.validate();
  return env;
}

EnvModel make_quadcopter_env() {
  EnvModel env;
  env.dim = 3;
  env.bounds = {Vec(-3.0, -3.0, -3.0), Vec(3.0, 3.0, 3.0)};
  const double s = 0.1;
  env.actions = {Vec(0.0, 0.0, s),  Vec(0.0, 0.0, -s), Vec(0.0, s, 0.0),
                 Vec(0.0, -s, 0.0), Vec(-s, 0.0, 0.0), Vec(s, 0.0, 0.0)};
  env.noise_var = 0.1;
  env.boundary = Boundary::clamp;
  env.unsafe_joint = {JointUnsafeSpec::Kind::max_pairwise_distance, 3.0};
  const Vec destination(2.0, 2.0, 2.0);
  const double max_dist = destination.distance(Vec(-3.0, -3.0, -3.0));
  env.reward_field =
      RewardField::negative_distance(destination, 1.0 / max_dist, 1.0);
  env.obs_noise_std = 0.1;
  env.validate();
  return env;
}

AgentConfig rover_agent_defaults(AgentKind kind, Objective objective) {
  AgentConfig cfg;
  cfg.kind = kind;
  cfg.objective = objective;
  cfg.kernel = {5.0, 1.2, 0.3};
  cfg.beta = BetaSchedule::constant(2.0);
  cfg.safety = {-0.5, 1.0, 0.7, 32, 1.0, 50};
  cfg.td.gamma = 0.9;
  cfg.sset_refresh = 5;
  cfg.infer_every = 10;
  cfg.eps_greedy = 0.1;
  cfg.gp_merge_cap = 400;
  return cfg;
}

AgentConfig quadcopter_agent_defaults(AgentKind kind) {
  AgentConfig cfg;
  cfg.kind = kind;
  cfg.objective = Objective::exploitation;
  cfg.kernel = {2.0, 1.0, 0.3};
  cfg.beta = BetaSchedule::constant(2.0);
  cfg.safety = {-8.0, 1.0, 0.7, 32, 0.5, 50};
  cfg.td.gamma = 0.9;
  cfg.sset_refresh = 25;
  cfg.infer_every = 10;
  cfg.eps_greedy = 0.1;
  cfg.gp_merge_cap = 400;
  return cfg;
}

ExperimentConfig rover_experiment(AgentKind instrumented_kind,
                                  Objective objective, int n_opponents,
                                  int n_seeds, int episodes, int steps,
                                  std::uint64_t terrain_seed, double size_m) {
  ExperimentConfig cfg;
  cfg.env = make_rover_env(synthetic_terrain(terrain_seed, size_m, 0.5), size_m);
  cfg.roster.push_back(rover_agent_defaults(instrumented_kind, objective));
  for (int i = 0; i < n_opponents; ++i) {
    AgentConfig opp = rover_agent_defaults(AgentKind::EpsGreedyQ);
    opp.eps_greedy = -1.0;  // per-seed random exploration rate
    cfg.roster.push_back(opp);
  }
  cfg.safety = cfg.roster[0].safety;
  cfg.episodes = episodes;
  cfg.steps = steps;
  cfg.seeds = seed_list(n_seeds);
  cfg.terminate_on_violation = false;
  cfg.instrumented = 0;
  // Starts concentrate in the central block so agent interaction density
  // stays comparable to the paper's crowded map.
  cfg.random_init = true;
  cfg.has_init_box = true;
  const double mid = size_m / 2.0;
  cfg.init_box = {Vec(mid - 2.0, mid - 2.0), Vec(mid + 2.0, mid + 2.0)};
  cfg.s0_radius = 3.0;
  return cfg;
}

ExperimentConfig quadcopter_experiment(AgentKind instrumented_kind, int n_seeds,
                                       int episodes, int steps) {
  ExperimentConfig cfg;
  cfg.env = make_quadcopter_env();
  cfg.roster.push_back(quadcopter_agent_defaults(instrumented_kind));
  cfg.roster.push_back(quadcopter_agent_defaults(AgentKind::EpsGreedyQ));
  cfg.roster[1].eps_greedy = 0.1;
  cfg.safety = cfg.roster[0].safety;
  cfg.episodes = episodes;
  cfg.steps = steps;
  cfg.seeds = seed_list(n_seeds);
  cfg.terminate_on_violation = true;
  cfg.instrumented = 0;
  cfg.random_init = false;
  cfg.fixed_init = {Vec(0.5, 0.0, 0.0), Vec(-0.5, 0.0, 0.0)};
  cfg.s0_radius = 1.5;
  return cfg;
}

}  // namespace masq
