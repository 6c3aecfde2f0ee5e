#include "masq/agents.hpp"

#include <cassert>
#include <cmath>

namespace masq {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::MultiSafeQ: return "multisafe";
    case AgentKind::NaiveQ: return "naive";
    case AgentKind::BayesianQ: return "bayesian";
    case AgentKind::SafeQ: return "safeq";
    case AgentKind::SingleSafeMDP: return "singlesafemdp";
    case AgentKind::EpsGreedyQ: return "epsgreedy";
  }
  return "unknown";
}

namespace {

Eigen::VectorXd coords_of(const Vec& p) {
  Eigen::VectorXd x(p.dim);
  for (int i = 0; i < p.dim; ++i) x(i) = p[i];
  return x;
}

bool uses_gp(AgentKind k) {
  return k == AgentKind::MultiSafeQ || k == AgentKind::SingleSafeMDP;
}

bool uses_penalty(AgentKind k) {
  return k == AgentKind::BayesianQ || k == AgentKind::SafeQ;
}

bool uses_td(AgentKind k) { return k != AgentKind::SingleSafeMDP; }

}  // namespace

Agent::Agent(AgentConfig config, const EnvModel& env, int agent_id,
             int n_agents, std::uint64_t seed, RegionPred initial_safe_region)
    : cfg_(std::move(config)),
      env_(env),
      id_(agent_id),
      n_agents_(n_agents),
      seed_(mix_seed({seed, std::uint64_t(agent_id), 0xa6e47ull})),
      s0_(std::move(initial_safe_region)) {
  env_.validate();
  cfg_.safety.validate();
  cfg_.td.validate();
  if (cfg_.eps_greedy < 0.0) {
    // Sentinel: draw the exploration rate from the agent's seed stream.
    Rng r(mix_seed({seed_, 0xe9ull}));
    cfg_.eps_greedy = r.uniform(0.05, 0.95);
  }

  const int own_dim = env_.dim;
  const int q_dim =
      cfg_.kind == AgentKind::SafeQ ? own_dim * n_agents_ : own_dim;
  q_ = std::make_unique<QTriple>(q_dim, env_.n_actions(),
                                 mix_seed({seed_, 0x71ull}), &env_.bounds,
                                 cfg_.td);
  if (uses_gp(cfg_.kind))
    gp_ = std::make_unique<GPosterior>(cfg_.kernel, cfg_.gp_merge_cap);

  if (cfg_.kind == AgentKind::MultiSafeQ) {
    for (int i = 0; i < n_agents_; ++i) {
      if (i == id_) continue;
      opp_models_.emplace_back(q_.get(), &cfg_.beta, cfg_.opponent_init);
      opp_trajs_.emplace_back(500);
      opp_agent_ids_.push_back(i);
    }
  }
  if (cfg_.kind == AgentKind::BayesianQ) {
    belief_lattice_ = Lattice(env_.bounds, cfg_.safety.lattice_spacing);
    for (int i = 0; i < n_agents_; ++i) {
      if (i == id_) continue;
      // Dirichlet(1, ..., 1) prior per cell.
      belief_counts_.push_back(
          Eigen::MatrixXd::Ones(belief_lattice_.size(), env_.n_actions()));
      opp_agent_ids_.push_back(i);
    }
  }
  if (!s0_ && uses_gp(cfg_.kind)) s0_from_start_ = true;
}

Eigen::VectorXd Agent::own_coords(const JointState& joint) const {
  return coords_of(joint.pos[size_t(id_)]);
}

Eigen::VectorXd Agent::q_input(const JointState& joint) const {
  if (cfg_.kind != AgentKind::SafeQ) return own_coords(joint);
  Eigen::VectorXd x(env_.dim * joint.size());
  for (int i = 0; i < joint.size(); ++i)
    for (int d = 0; d < env_.dim; ++d) x(i * env_.dim + d) = joint.pos[size_t(i)][d];
  return x;
}

void Agent::observe_reward(const Vec& at, double reward_obs) {
  if (gp_) gp_->add(at, reward_obs);
}

Eigen::VectorXd Agent::belief_action_probs(int opponent, const Vec& at) const {
  const Eigen::VectorXd counts =
      belief_counts_[size_t(opponent)].row(belief_lattice_.cell_of(at));
  return counts / counts.sum();
}

void Agent::refresh_safe_set(const JointState& joint, std::int64_t t) {
  if (sset_valid_ && t - sset_t_ < cfg_.sset_refresh) return;
  if (!start_set_) {
    start_point_ = joint.pos[size_t(id_)];
    start_set_ = true;
  }
  RegionPred region = s0_;
  if (s0_from_start_) {
    const Vec start = start_point_;
    const double radius = 3.0 * cfg_.safety.lattice_spacing;
    region = [start, radius](const Vec& p) {
      return p.distance(start) <= radius;
    };
  }
  Rng rng = Rng(mix_seed({seed_, 0x55e7ull, std::uint64_t(t)}));
  sset_ = compute_safe_return_set(*gp_, cfg_.beta, env_, region, cfg_.safety,
                                  t, rng);
  sset_valid_ = true;
  sset_t_ = t;
}

std::vector<OpponentLaw> Agent::joint_safety_laws(const JointState& joint) const {
  std::vector<OpponentLaw> laws;
  const int n_actions = env_.n_actions();
  if (cfg_.kind == AgentKind::MultiSafeQ)
    return upper_bound_laws(joint, id_, opp_models_);
  int oi = 0;
  for (int i = 0; i < joint.size(); ++i) {
    if (i == id_) continue;
    OpponentLaw law;
    law.state = joint.pos[size_t(i)];
    law.mass = 1.0;
    if (cfg_.kind == AgentKind::BayesianQ)
      law.weights = belief_action_probs(oi, joint.pos[size_t(i)]);
    else
      law.weights =
          Eigen::VectorXd::Constant(n_actions, 1.0 / double(n_actions));
    laws.push_back(std::move(law));
    ++oi;
  }
  return laws;
}

int Agent::eps_greedy_pick(const Eigen::VectorXd& q_values,
                           std::span<const int> candidates, Rng& rng) const {
  if (rng.uniform() < cfg_.eps_greedy)
    return candidates[size_t(rng.uniform_int(int(candidates.size())))];
  int best = candidates[0];
  for (int a : candidates)
    if (q_values(a) > q_values(best)) best = a;
  return best;
}

ActDecision Agent::act_multi_safe(const JointState& joint, std::int64_t t) {
  refresh_safe_set(joint, t);
  const auto laws = joint_safety_laws(joint);
  Rng rng(mix_seed({seed_, 0xac7ull, std::uint64_t(t)}));
  ActionAssessment assess =
      assess_actions(joint, id_, *gp_, cfg_.beta, sset_, laws, env_,
                     cfg_.safety, t, rng);

  int action;
  if (assess.n_safe > 0) {
    const Eigen::VectorXd score = cfg_.objective == Objective::exploration
                                      ? assess.mean_sigma
                                      : q_->q_mu(own_coords(joint));
    action = -1;
    for (int a = 0; a < env_.n_actions(); ++a) {
      if (!assess.safe[size_t(a)]) continue;
      if (action < 0 || score(a) > score(action)) action = a;
    }
    assert(assess.safe[size_t(action)]);
  } else {
    action = assess.argmax_joint_safe();
  }
  return {action, std::move(assess)};
}

ActDecision Agent::act_single_safe(const JointState& joint, std::int64_t t) {
  refresh_safe_set(joint, t);
  Rng rng(mix_seed({seed_, 0xac7ull, std::uint64_t(t)}));
  ActionAssessment assess = assess_actions(
      joint, id_, *gp_, cfg_.beta, sset_, {}, env_, cfg_.safety, t, rng);

  int action = -1;
  if (assess.n_safe > 0) {
    const Eigen::VectorXd& score = cfg_.objective == Objective::exploration
                                       ? assess.mean_sigma
                                       : assess.lower_reward;
    for (int a = 0; a < env_.n_actions(); ++a) {
      if (!assess.safe[size_t(a)]) continue;
      if (action < 0 || score(a) > score(action)) action = a;
    }
  } else {
    action = 0;
    for (int a = 1; a < env_.n_actions(); ++a)
      if (assess.return_prob(a) > assess.return_prob(action)) action = a;
  }
  return {action, std::move(assess)};
}

ActDecision Agent::act_filtered(const JointState& joint, std::int64_t t) {
  const auto laws = joint_safety_laws(joint);
  Rng rng(mix_seed({seed_, 0xac7ull, std::uint64_t(t)}));
  const int n_actions = env_.n_actions();

  // Collision filter only; these baselines have no individual-safety model.
  const Vec own = joint.pos[size_t(id_)];
  Eigen::VectorXd lc(n_actions);
  {
    std::vector<Vec> noise;
    noise.reserve(size_t(cfg_.safety.mc_samples));
    for (int k = 0; k < cfg_.safety.mc_samples; ++k)
      noise.push_back(env_.draw_noise(rng));
    const Rng inner_base = rng.split(0x1ccull);
    std::vector<Vec> outcomes(static_cast<size_t>(cfg_.safety.mc_samples));
    for (int a = 0; a < n_actions; ++a) {
      const Vec nominal = env_.nominal_next(own, a);
      for (int k = 0; k < cfg_.safety.mc_samples; ++k)
        outcomes[size_t(k)] = env_.apply_noise(nominal, noise[size_t(k)]);
      Rng inner = inner_base;
      lc(a) = joint_safety_lcb_with_outcomes(joint, id_, outcomes, laws, env_,
                                             cfg_.safety.mc_samples, inner);
    }
  }

  std::vector<int> candidates;
  for (int a = 0; a < n_actions; ++a)
    if (lc(a) >= cfg_.safety.c) candidates.push_back(a);
  if (candidates.empty()) {
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
      if (lc(a) > lc(best)) best = a;
    return {best, std::nullopt};
  }
  return {eps_greedy_pick(q_->q_mu(own_coords(joint)), candidates, rng),
          std::nullopt};
}

ActDecision Agent::act(const JointState& joint, std::int64_t t) {
  switch (cfg_.kind) {
    case AgentKind::MultiSafeQ:
      return act_multi_safe(joint, t);
    case AgentKind::SingleSafeMDP:
      return act_single_safe(joint, t);
    case AgentKind::NaiveQ:
    case AgentKind::BayesianQ:
      return act_filtered(joint, t);
    case AgentKind::SafeQ:
    case AgentKind::EpsGreedyQ: {
      Rng rng(mix_seed({seed_, 0xac7ull, std::uint64_t(t)}));
      std::vector<int> all(static_cast<size_t>(env_.n_actions()));
      for (int a = 0; a < env_.n_actions(); ++a) all[size_t(a)] = a;
      return {eps_greedy_pick(q_->q_mu(q_input(joint)), all, rng),
              std::nullopt};
    }
  }
  throw std::logic_error("act: unknown agent kind");
}

void Agent::td_step(std::int64_t t) {
  if (int(replay_.size()) < cfg_.batch_size) return;
  Rng rng(mix_seed({seed_, 0x1ea2ull, std::uint64_t(t)}));
  std::vector<Transition> batch;
  batch.reserve(size_t(cfg_.batch_size));
  for (int i = 0; i < cfg_.batch_size; ++i)
    batch.push_back(replay_[size_t(rng.uniform_int(int(replay_.size())))]);

  BoundsFn bounds;
  if (cfg_.kind == AgentKind::MultiSafeQ) {
    const GPosterior* gp = gp_.get();
    const BetaSchedule* beta = &cfg_.beta;
    const int dim = env_.dim;
    bounds = [gp, beta, dim, t](const Transition& tr) -> std::array<double, 3> {
      Vec p = Vec::zero(dim);
      for (int i = 0; i < dim; ++i) p[i] = tr.s_next(i);
      const GpQuery q = gp->query_bounds(p, *beta, std::max<std::int64_t>(t, 1));
      return {q.mean, q.upper, q.lower};
    };
  } else {
    bounds = [](const Transition& tr) -> std::array<double, 3> {
      return {tr.reward_obs, tr.reward_obs, tr.reward_obs};
    };
  }
  q_->td_update(batch, bounds);
}

void Agent::learn(const JointState& before, std::span<const int> actions_all,
                  const JointState& after, double own_reward_obs,
                  StepFlags flags, std::int64_t t) {
  if (!start_set_) {
    start_point_ = before.pos[size_t(id_)];
    start_set_ = true;
  }

  double learn_reward = own_reward_obs;
  if (uses_penalty(cfg_.kind)) {
    if (flags.indiv_unsafe) learn_reward += cfg_.penalty;
    if (flags.joint_unsafe) learn_reward += cfg_.penalty;
  }

  if (uses_td(cfg_.kind)) {
    Transition tr;
    tr.s = q_input(before);
    tr.s_next = q_input(after);
    tr.a = actions_all[size_t(id_)];
    tr.reward_obs = learn_reward;
    if (int(replay_.size()) < cfg_.replay_capacity) {
      replay_.push_back(std::move(tr));
    } else {
      replay_[replay_next_] = std::move(tr);
      replay_next_ = (replay_next_ + 1) % size_t(cfg_.replay_capacity);
    }
    td_step(t);
  }

  if (uses_gp(cfg_.kind)) gp_->add(after.pos[size_t(id_)], own_reward_obs);

  if (cfg_.kind == AgentKind::MultiSafeQ) {
    for (size_t j = 0; j < opp_trajs_.size(); ++j) {
      const int aj = opp_agent_ids_[j];
      opp_trajs_[j].append(before.pos[size_t(aj)], actions_all[size_t(aj)],
                           after.pos[size_t(aj)], t);
    }
    if ((t + 1) % cfg_.infer_every == 0) {
      for (size_t j = 0; j < opp_trajs_.size(); ++j)
        if (!opp_trajs_[j].empty())
          opp_models_[j].set_params(infer_params(opp_trajs_[j], *q_));
    }
  }

  if (cfg_.kind == AgentKind::BayesianQ) {
    for (size_t j = 0; j < belief_counts_.size(); ++j) {
      const int aj = opp_agent_ids_[j];
      belief_counts_[j](belief_lattice_.cell_of(before.pos[size_t(aj)]),
                        actions_all[size_t(aj)]) += 1.0;
    }
  }
}

}  // namespace masq
