#include <doctest.h>

#include <cmath>
#include <map>

#include "masq/agents.hpp"
#include "masq/presets.hpp"

using namespace masq;

namespace {

ExperimentConfig tiny_rover(AgentKind kind, int n_opponents,
                            Objective objective = Objective::exploitation) {
  ExperimentConfig cfg =
      rover_experiment(kind, objective, n_opponents, 1, 1, 5, 3, 10.0);
  for (AgentConfig& a : cfg.roster) a.safety.mc_samples = 16;
  cfg.safety.mc_samples = 16;
  return cfg;
}

RegionPred everywhere() {
  return [](const Vec&) { return true; };
}

}  // namespace

TEST_CASE("multi-safe agent stays inside the safe action set") {
  ExperimentConfig cfg = tiny_rover(AgentKind::MultiSafeQ, 2);
  Agent agent(cfg.roster[0], cfg.env, 0, 3, 42, everywhere());
  Rng rng(1);
  JointState joint{{Vec(5.0, 5.0), Vec(2.0, 2.0), Vec(8.0, 8.0)}};
  std::vector<int> actions = {0, 0, 0};
  for (std::int64_t t = 0; t < 12; ++t) {
    const ActDecision d = agent.act(joint, t);
    REQUIRE(d.assessment.has_value());
    const ActionAssessment& as = *d.assessment;
    if (as.n_safe > 0) {
      CHECK(as.safe[size_t(d.action)] == 1);
    } else {
      CHECK(d.action == as.argmax_joint_safe());
    }
    actions.assign({d.action, int(t) % 4, int(t + 1) % 4});
    auto [next, obs] = cfg.env.step(joint, actions, rng);
    for (int i = 0; i < 3; ++i) {
      Agent* a = i == 0 ? &agent : nullptr;
      if (a) a->learn(joint, actions, next, obs[size_t(i)], {}, t);
    }
    joint = next;
  }
}

TEST_CASE("forced singleton safe set is chosen regardless of objective") {
  for (Objective obj : {Objective::exploitation, Objective::exploration}) {
    ExperimentConfig cfg = tiny_rover(AgentKind::MultiSafeQ, 0, obj);
    Agent agent(cfg.roster[0], cfg.env, 0, 1, 7, everywhere());
    JointState joint{{Vec(5.0, 5.0)}};
    for (std::int64_t t = 0; t < 4; ++t) {
      const ActDecision d = agent.act(joint, t);
      const ActionAssessment& as = *d.assessment;
      if (as.n_safe == 1) {
        int only = -1;
        for (int a = 0; a < 4; ++a)
          if (as.safe[size_t(a)]) only = a;
        CHECK(d.action == only);
      }
    }
  }
}

TEST_CASE("exploration objective picks the highest mean-sigma safe action") {
  ExperimentConfig cfg = tiny_rover(AgentKind::MultiSafeQ, 0,
                                    Objective::exploration);
  Agent agent(cfg.roster[0], cfg.env, 0, 1, 11, everywhere());
  // Feed observations on one side so sigma is asymmetric across actions.
  Rng rng(2);
  JointState joint{{Vec(5.0, 5.0)}};
  std::vector<int> acts = {0};
  for (std::int64_t t = 0; t < 10; ++t) {
    auto [next, obs] = cfg.env.step(joint, acts, rng);
    agent.learn(joint, acts, next, obs[0], {}, t);
  }
  const ActDecision d = agent.act(joint, 10);
  const ActionAssessment& as = *d.assessment;
  if (as.n_safe > 1) {
    for (int a = 0; a < 4; ++a)
      if (as.safe[size_t(a)])
        CHECK(as.mean_sigma(d.action) >= as.mean_sigma(a) - 1e-15);
  }
}

TEST_CASE("learn bumps the GP observation count and respects the schedule") {
  ExperimentConfig cfg = tiny_rover(AgentKind::MultiSafeQ, 1);
  Agent agent(cfg.roster[0], cfg.env, 0, 2, 5, everywhere());
  Rng rng(3);
  JointState joint{{Vec(5.0, 5.0), Vec(2.0, 8.0)}};
  std::map<std::int64_t, double> eps_history;
  for (std::int64_t t = 0; t < 25; ++t) {
    (void)agent.act(joint, t);
    const std::int64_t before = agent.gp()->observation_count();
    std::vector<int> actions = {int(t) % 4, int(t + 2) % 4};
    auto [next, obs] = cfg.env.step(joint, actions, rng);
    agent.learn(joint, actions, next, obs[0], {}, t);
    CHECK(agent.gp()->observation_count() == before + 1);
    eps_history[t] = agent.opponents()[0].params().eps;
    joint = next;
  }
  // Opponent parameters only move at the inference refresh (every 10 steps),
  // i.e. eps recorded after step t can differ from step t-1 only when
  // (t+1) % 10 == 0.
  for (std::int64_t t = 0; t < 24; ++t)
    if ((t + 2) % 10 != 0)
      CHECK(eps_history[t + 1] == eps_history[t]);
}

TEST_CASE("identically seeded agents evolve identically") {
  ExperimentConfig cfg = tiny_rover(AgentKind::MultiSafeQ, 1);
  Agent a(cfg.roster[0], cfg.env, 0, 2, 99, everywhere());
  Agent b(cfg.roster[0], cfg.env, 0, 2, 99, everywhere());
  Rng rng(4);
  JointState joint{{Vec(5.0, 5.0), Vec(2.0, 8.0)}};
  for (std::int64_t t = 0; t < 15; ++t) {
    const ActDecision da = a.act(joint, t);
    const ActDecision db = b.act(joint, t);
    CHECK(da.action == db.action);
    std::vector<int> actions = {da.action, int(3 * t + 1) % 4};
    auto [next, obs] = cfg.env.step(joint, actions, rng);
    a.learn(joint, actions, next, obs[0], {}, t);
    b.learn(joint, actions, next, obs[0], {}, t);
    joint = next;
  }
}

TEST_CASE("pure-exploration eps-greedy acts uniformly") {
  ExperimentConfig cfg = tiny_rover(AgentKind::EpsGreedyQ, 0);
  AgentConfig ac = cfg.roster[0];
  ac.kind = AgentKind::EpsGreedyQ;
  ac.eps_greedy = 1.0;
  Agent agent(ac, cfg.env, 0, 1, 21, nullptr);
  JointState joint{{Vec(5.0, 5.0)}};
  const int n = 10000;
  std::array<int, 4> counts{};
  for (std::int64_t t = 0; t < n; ++t)
    counts[size_t(agent.act(joint, t).action)]++;
  // Three-sigma band around n/4 for a binomial with p = 1/4.
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (int a = 0; a < 4; ++a)
    CHECK(std::abs(counts[size_t(a)] - n / 4.0) < 3.0 * sd);
}

TEST_CASE("naive agent's uniform collision term matches joint_safety_lcb") {
  ExperimentConfig cfg = tiny_rover(AgentKind::NaiveQ, 1);
  const EnvModel& env = cfg.env;
  JointState joint{{Vec(5.0, 5.0), Vec(5.4, 5.0)}};

  // Uniform law, as the naive agent assumes.
  std::vector<OpponentLaw> uniform_laws(1);
  uniform_laws[0].state = joint.pos[1];
  uniform_laws[0].weights = Eigen::VectorXd::Constant(4, 0.25);
  uniform_laws[0].mass = 1.0;

  // Opponent model forced to a uniform policy: pure Boltzmann at a huge
  // temperature over a freshly initialized (all-zero) Q triple.
  const Box box = env.bounds;
  QTriple q(2, 4, 3, &box);
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const OpponentModel model(&q, &beta, {0.0, 1.0, 1e9});
  std::vector<OpponentLaw> model_laws(1);
  model_laws[0].state = joint.pos[1];
  model_laws[0].weights = model.action_probs(joint.pos[1]);
  model_laws[0].mass = model_laws[0].weights.sum();

  SafetyConfig scfg = cfg.safety;
  scfg.mc_samples = 500;
  for (int a = 0; a < 4; ++a) {
    Rng r1(50), r2(50);
    const double lc_u = joint_safety_lcb(joint, 0, a, uniform_laws, env, scfg, r1);
    const double lc_m = joint_safety_lcb(joint, 0, a, model_laws, env, scfg, r2);
    CHECK(lc_u == doctest::Approx(lc_m).epsilon(1e-9));
  }
}

TEST_CASE("safeq consumes the joint state") {
  ExperimentConfig cfg = tiny_rover(AgentKind::SafeQ, 2);
  Agent agent(cfg.roster[0], cfg.env, 0, 3, 17, nullptr);
  CHECK(agent.q().head(0).input_dim() == 3 * cfg.env.dim);
}

TEST_CASE("bayesian belief stays a proper distribution under updates") {
  ExperimentConfig cfg = tiny_rover(AgentKind::BayesianQ, 2);
  Agent agent(cfg.roster[0], cfg.env, 0, 3, 23, nullptr);
  Rng rng(6);
  JointState joint{{Vec(5.0, 5.0), Vec(2.0, 2.0), Vec(8.0, 3.0)}};
  for (std::int64_t t = 0; t < 20; ++t) {
    std::vector<int> actions = {agent.act(joint, t).action, rng.uniform_int(4),
                                rng.uniform_int(4)};
    auto [next, obs] = cfg.env.step(joint, actions, rng);
    agent.learn(joint, actions, next, obs[0], {}, t);
    for (int o = 0; o < 2; ++o) {
      const Eigen::VectorXd p =
          agent.belief_action_probs(o, joint.pos[size_t(o + 1)]);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(p.minCoeff() > 0.0);
    }
    joint = next;
  }
}

TEST_CASE("single-safe-mdp agent runs without joint-safety machinery") {
  ExperimentConfig cfg = tiny_rover(AgentKind::SingleSafeMDP, 0,
                                    Objective::exploration);
  Agent agent(cfg.roster[0], cfg.env, 0, 1, 31, everywhere());
  Rng rng(7);
  JointState joint{{Vec(5.0, 5.0)}};
  for (std::int64_t t = 0; t < 10; ++t) {
    const ActDecision d = agent.act(joint, t);
    REQUIRE(d.assessment.has_value());
    // No opponents: the joint-safety bound is vacuous.
    CHECK(d.assessment->joint_safe_lcb.minCoeff() == 1.0);
    std::vector<int> actions = {d.action};
    auto [next, obs] = cfg.env.step(joint, actions, rng);
    agent.learn(joint, actions, next, obs[0], {}, t);
    joint = next;
  }
}
