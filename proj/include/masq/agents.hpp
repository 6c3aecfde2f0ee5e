#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masq/environment.hpp"
#include "masq/gp_reward.hpp"
#include "masq/opponent_model.hpp"
#include "masq/q_estimator.hpp"
#include "masq/safety_core.hpp"

namespace masq {

enum class AgentKind {
  MultiSafeQ,
  NaiveQ,
  BayesianQ,
  SafeQ,
  SingleSafeMDP,
  EpsGreedyQ,
};

enum class Objective { exploitation, exploration };

std::string to_string(AgentKind kind);

struct AgentConfig {
  AgentKind kind = AgentKind::MultiSafeQ;
  Objective objective = Objective::exploitation;

  double eps_greedy = 0.1;   // exploration rate for the eps-greedy kinds
  double penalty = -10.0;    // learning-only reward on unsafe events
  int infer_every = 10;      // opponent-parameter refresh period, steps
  int sset_refresh = 1;      // safe-return-set refresh period, steps
  int replay_capacity = 10000;
  int batch_size = 32;
  int gp_merge_cap = 1000;

  TdConfig td;
  KernelSpec kernel;
  BetaSchedule beta = BetaSchedule::constant(2.0);
  SafetyConfig safety;
  PolicyParams opponent_init{0.5, 1.0, 1.0};
};

struct StepFlags {
  bool indiv_unsafe = false;
  bool joint_unsafe = false;
};

struct ActDecision {
  int action = 0;
  std::optional<ActionAssessment> assessment;
};

/// One decentralized agent behind a uniform act/learn interface. Owns its
/// reward belief, action-value triple, replay buffer, and per-opponent
/// models; nothing is shared across agents.
class Agent {
 public:
  Agent(AgentConfig config, const EnvModel& env, int agent_id, int n_agents,
        std::uint64_t seed, RegionPred initial_safe_region = nullptr);

  /// Reward observation of the agent's own current state (available at every
  /// step, including the episode's initial state). Feeds the reward belief.
  void observe_reward(const Vec& at, double reward_obs);

  /// Selects an action for the current joint state. Deterministic given the
  /// construction seed, t, and the agent's accumulated state.
  ActDecision act(const JointState& joint, std::int64_t t);

  /// Consumes one synchronous transition: updates the reward belief, the
  /// Q triple, opponent trajectories, and scheduled re-inference.
  void learn(const JointState& before, std::span<const int> actions_all,
             const JointState& after, double own_reward_obs, StepFlags flags,
             std::int64_t t);

  AgentKind kind() const { return cfg_.kind; }
  int id() const { return id_; }
  const AgentConfig& config() const { return cfg_; }
  const GPosterior* gp() const { return gp_.get(); }
  const QTriple& q() const { return *q_; }
  std::span<const OpponentModel> opponents() const { return opp_models_; }
  const SafeReturnSet* safe_set() const {
    return sset_valid_ ? &sset_ : nullptr;
  }

  /// Dirichlet posterior mean over one opponent's actions at a lattice cell.
  Eigen::VectorXd belief_action_probs(int opponent, const Vec& at) const;

 private:
  Eigen::VectorXd own_coords(const JointState& joint) const;
  Eigen::VectorXd q_input(const JointState& joint) const;
  void refresh_safe_set(const JointState& joint, std::int64_t t);
  std::vector<OpponentLaw> joint_safety_laws(const JointState& joint) const;
  int eps_greedy_pick(const Eigen::VectorXd& q_values,
                      std::span<const int> candidates, Rng& rng) const;
  ActDecision act_multi_safe(const JointState& joint, std::int64_t t);
  ActDecision act_single_safe(const JointState& joint, std::int64_t t);
  ActDecision act_filtered(const JointState& joint, std::int64_t t);
  void td_step(std::int64_t t);

  AgentConfig cfg_;
  EnvModel env_;
  int id_ = 0;
  int n_agents_ = 1;
  std::uint64_t seed_ = 0;

  std::unique_ptr<GPosterior> gp_;
  std::unique_ptr<QTriple> q_;
  std::vector<Transition> replay_;
  size_t replay_next_ = 0;

  std::vector<OpponentModel> opp_models_;
  std::vector<TrajectoryLog> opp_trajs_;
  std::vector<int> opp_agent_ids_;

  // BayesianQ: per-opponent, per-cell Dirichlet counts over actions.
  Lattice belief_lattice_;
  std::vector<Eigen::MatrixXd> belief_counts_;

  SafeReturnSet sset_;
  bool sset_valid_ = false;
  std::int64_t sset_t_ = -1;
  RegionPred s0_;
  bool s0_from_start_ = false;
  Vec start_point_;
  bool start_set_ = false;
};

}  // namespace masq
