#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "masq/harness.hpp"

namespace masq {

/// Terrain-rover domain: 2-D wrapped map, four 1 m moves with per-axis
/// Gaussian error, pairwise collision distance as the joint constraint.
EnvModel make_rover_env(RewardField terrain, double size_m = 20.0);

/// Quadcopter-pair domain: [-3,3]^3 clamped box, six 0.1-unit moves,
/// maximum pairwise separation as the joint constraint, reward falling off
/// with distance to the destination (normalized into [0,1]).
EnvModel make_quadcopter_env();

AgentConfig rover_agent_defaults(AgentKind kind,
                                 Objective objective = Objective::exploitation);
AgentConfig quadcopter_agent_defaults(AgentKind kind);

/// Rover experiment: one instrumented agent plus eps-greedy opponents with
/// per-seed random exploration rates.
ExperimentConfig rover_experiment(AgentKind instrumented_kind,
                                  Objective objective, int n_opponents,
                                  int n_seeds, int episodes, int steps,
                                  std::uint64_t terrain_seed = 10,
                                  double size_m = 20.0);

/// Quadcopter experiment: instrumented agent paired with one eps-greedy
/// agent (eps = 0.1).
ExperimentConfig quadcopter_experiment(AgentKind instrumented_kind,
                                       int n_seeds, int episodes, int steps);

std::vector<std::uint64_t> seed_list(int n_seeds);

}  // namespace masq
