#include <doctest.h>

#include <cmath>
#include <unordered_set>

#include "masq/safety_core.hpp"
#include "oracles.hpp"

using namespace masq;

namespace {

EnvModel toy_env(double noise_var, double size = 5.0,
                 Boundary boundary = Boundary::clamp) {
  EnvModel env;
  env.dim = 2;
  env.bounds = {Vec(0.0, 0.0), Vec(size, size)};
  env.actions = {Vec(0.0, 1.0), Vec(0.0, -1.0), Vec(-1.0, 0.0), Vec(1.0, 0.0)};
  env.noise_var = noise_var;
  env.boundary = boundary;
  env.unsafe_joint = {JointUnsafeSpec::Kind::min_pairwise_distance, 0.6};
  env.reward_field = RewardField::negative_distance(Vec(size / 2, size / 2));
  env.obs_noise_std = 0.0;
  env.validate();
  return env;
}

SafetyConfig toy_cfg(int m = 1000) {
  SafetyConfig cfg;
  cfg.h = -0.5;
  cfg.tau = 1.0;
  cfg.c = 0.7;
  cfg.mc_samples = m;
  cfg.lattice_spacing = 1.0;
  cfg.fixed_point_cap = 50;
  return cfg;
}

SafeReturnSet half_plane_set(const EnvModel& env, double split_x) {
  SafeReturnSet sset;
  sset.lattice = Lattice(env.bounds, 1.0);
  sset.member.assign(size_t(sset.lattice.size()), 0);
  for (int c = 0; c < sset.lattice.size(); ++c)
    if (sset.lattice.center(c)[0] < split_x) sset.member[size_t(c)] = 1;
  return sset;
}

}  // namespace

TEST_CASE("lattice indexing round-trips cell centers") {
  const Lattice lat(Box{Vec(0.0, 0.0), Vec(5.0, 4.0)}, 1.0);
  CHECK(lat.size() == 20);
  for (int c = 0; c < lat.size(); ++c)
    CHECK(lat.cell_of(lat.center(c)) == c);
}

TEST_CASE("zero-noise lr reduces to r_lo at the nominal next state") {
  EnvModel env = toy_env(0.0);
  GPosterior gp(KernelSpec{1.0, 1.0, 0.3});
  Rng seed(1);
  for (int i = 0; i < 6; ++i)
    gp.add(env.bounds.sample(seed), seed.gaussian());
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const SafetyConfig cfg = toy_cfg(64);
  Rng rng(2);
  for (int a = 0; a < 4; ++a) {
    const Vec s(2.5, 2.5);
    const double lr = reward_lcb(s, a, gp, beta, 5, env, cfg, rng);
    const GpQuery q = gp.query_bounds(env.nominal_next(s, a), beta, 5);
    CHECK(lr == doctest::Approx(q.lower).epsilon(1e-12));
  }
}

TEST_CASE("constant r_lo makes lr constant across actions") {
  EnvModel env = toy_env(0.2);
  const GPosterior gp(KernelSpec{1.0, 1.3, 0.3});  // empty: r_lo == -beta*sigma
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const SafetyConfig cfg = toy_cfg(128);
  Rng rng(3);
  const Vec s(2.5, 2.5);
  for (int a = 0; a < 4; ++a) {
    Rng r = rng.split(std::uint64_t(a));
    CHECK(reward_lcb(s, a, gp, beta, 1, env, cfg, r) ==
          doctest::Approx(-2.0 * 1.3).epsilon(1e-12));
  }
}

TEST_CASE("lr Monte Carlo agrees with a quadrature oracle") {
  EnvModel env = toy_env(0.15);
  GPosterior gp(KernelSpec{0.9, 1.0, 0.2});
  Rng seed(4);
  for (int i = 0; i < 12; ++i)
    gp.add(env.bounds.sample(seed), seed.gaussian());
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const SafetyConfig cfg = toy_cfg(10000);
  const Vec s(2.0, 3.0);
  const double sd = std::sqrt(env.noise_var);

  for (int a = 0; a < 4; ++a) {
    Rng rng(mix_seed({5u, std::uint64_t(a)}));
    const double mc = reward_lcb(s, a, gp, beta, 7, env, cfg, rng);

    // Cell-mass quadrature over a fine clamped grid.
    const Vec nominal = env.nominal_next(s, a);
    const int n = 160;
    const auto mx =
        oracles::clamped_cell_masses(nominal[0], sd, 0.0, 5.0, n);
    const auto my =
        oracles::clamped_cell_masses(nominal[1], sd, 0.0, 5.0, n);
    double exact = 0.0;
    const double w = 5.0 / n;
    for (int ix = 0; ix < n; ++ix) {
      for (int iy = 0; iy < n; ++iy) {
        const double p = mx[size_t(ix)] * my[size_t(iy)];
        if (p < 1e-14) continue;
        const Vec pt(0.0 + (ix + 0.5) * w, 0.0 + (iy + 0.5) * w);
        const GpQuery q = gp.query_bounds(pt, beta, 7);
        exact += p * q.lower;
      }
    }
    CHECK(std::abs(mc - exact) <= 0.02 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("safe-return set: maximal seed region stays maximal") {
  EnvModel env = toy_env(0.1);
  const GPosterior gp(KernelSpec{1.0, 1.0, 0.3});
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const SafetyConfig cfg = toy_cfg(64);
  Rng rng(6);
  const SafeReturnSet sset = compute_safe_return_set(
      gp, beta, env, [](const Vec&) { return true; }, cfg, 1, rng);
  CHECK(sset.count() == sset.lattice.size());
}

TEST_CASE("safe-return set contains its seed region and grows monotonically") {
  EnvModel env = toy_env(0.05);
  GPosterior gp(KernelSpec{2.0, 0.4, 0.2});
  Rng seed(7);
  for (double x = 0.5; x < 5.0; x += 1.0)
    for (double y = 0.5; y < 5.0; y += 1.0) gp.add(Vec(x, y), 1.0);
  const BetaSchedule beta = BetaSchedule::constant(1.0);
  SafetyConfig cfg = toy_cfg(200);
  cfg.tau = 0.8;
  const RegionPred s0 = [](const Vec& p) { return p.distance(Vec(2.5, 2.5)) < 1.0; };
  Rng rng(8);
  const SafeReturnSet sset =
      compute_safe_return_set(gp, beta, env, s0, cfg, 1, rng);
  for (int c = 0; c < sset.lattice.size(); ++c)
    if (s0(sset.lattice.center(c))) CHECK(sset.member[size_t(c)] == 1);
  CHECK(sset.count() > 1);  // expansion happened
}

TEST_CASE("safe-return set matches a BFS oracle around a low-reward wall") {
  // 5x5 lattice; a wall of strongly negative r_lo cells at x in [2,3) splits
  // the map. Small noise keeps transition decisions far from thresholds.
  EnvModel env = toy_env(0.0225);  // sd = 0.15
  GPosterior gp(KernelSpec{0.45, 1.0, 0.05});
  for (double x = 0.5; x < 5.0; x += 1.0)
    for (double y = 0.5; y < 5.0; y += 1.0)
      gp.add(Vec(x, y), x >= 2.0 && x < 3.0 ? -3.0 : 1.0);
  const BetaSchedule beta = BetaSchedule::constant(1.0);
  SafetyConfig cfg = toy_cfg(400);
  cfg.tau = 0.5;
  cfg.h = -0.5;
  const RegionPred s0 = [](const Vec& p) {
    return p.distance(Vec(0.5, 2.5)) < 0.1;
  };
  Rng rng(9);
  const SafeReturnSet sset =
      compute_safe_return_set(gp, beta, env, s0, cfg, 1, rng);

  // Independent BFS with analytic cell-transition masses.
  const Lattice& lat = sset.lattice;
  const double sd = std::sqrt(env.noise_var);
  std::vector<double> cell_r_lo(static_cast<size_t>(lat.size()));
  for (int c = 0; c < lat.size(); ++c) {
    const auto [m, s] = gp.query(lat.center(c));
    cell_r_lo[size_t(c)] = m - 1.0 * s;
  }
  std::vector<char> member(size_t(lat.size()), 0);
  for (int c = 0; c < lat.size(); ++c)
    if (s0(lat.center(c))) member[size_t(c)] = 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int c = 0; c < lat.size(); ++c) {
      if (member[size_t(c)]) continue;
      bool ok = false;
      for (int a = 0; a < env.n_actions() && !ok; ++a) {
        const Vec nominal = env.nominal_next(lat.center(c), a);
        const auto mx = oracles::clamped_cell_masses(nominal[0], sd, 0.0, 5.0, 5);
        const auto my = oracles::clamped_cell_masses(nominal[1], sd, 0.0, 5.0, 5);
        double p_return = 0.0, lr_disc = 0.0;
        for (int ix = 0; ix < 5; ++ix)
          for (int iy = 0; iy < 5; ++iy) {
            const int cell = lat.cell_of(Vec(ix + 0.5, iy + 0.5));
            const double p = mx[size_t(ix)] * my[size_t(iy)];
            if (member[size_t(cell)]) p_return += p;
            lr_disc += p * cell_r_lo[size_t(cell)];
          }
        ok = lr_disc >= cfg.h && p_return > cfg.tau;
      }
      if (ok) {
        member[size_t(c)] = 1;
        changed = true;
      }
    }
  }
  for (int c = 0; c < lat.size(); ++c)
    CHECK(int(sset.member[size_t(c)]) == int(member[size_t(c)]));
  // The wall blocks growth: no member cells beyond it.
  for (int c = 0; c < lat.size(); ++c)
    if (lat.center(c)[0] > 3.0) CHECK(sset.member[size_t(c)] == 0);
}

TEST_CASE("returnability: full set, point mass outside, and half plane") {
  EnvModel env = toy_env(0.1, 10.0);
  const SafetyConfig cfg = toy_cfg(1000);

  SafeReturnSet all = half_plane_set(env, 1e9);
  Rng rng(10);
  CHECK(returnability(Vec(5.0, 5.0), 0, all, env, cfg, rng) == 1.0);

  EnvModel frozen = toy_env(0.0, 10.0);
  SafeReturnSet none = half_plane_set(frozen, -1.0);
  CHECK(returnability(Vec(5.0, 5.0), 0, none, frozen, cfg, rng) == 0.0);

  // Isotropic noise centered on the membership boundary.
  SafeReturnSet half = half_plane_set(env, 5.0);
  const double p = returnability(Vec(4.0, 5.0), 3, half, env, cfg, rng);
  CHECK(p == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(p - 0.5) < 0.05);
}

TEST_CASE("lc is exactly one with no opponents") {
  EnvModel env = toy_env(0.1);
  const SafetyConfig cfg = toy_cfg(100);
  Rng rng(11);
  JointState joint{{Vec(2.5, 2.5)}};
  CHECK(joint_safety_lcb(joint, 0, 0, {}, env, cfg, rng) == 1.0);
}

TEST_CASE("lc is zero for a certain collision") {
  EnvModel env = toy_env(0.0);
  env.actions = {Vec(0.0, 1.0)};  // single action
  const SafetyConfig cfg = toy_cfg(100);
  JointState joint{{Vec(2.0, 2.0), Vec(2.0, 2.1)}};  // both move up in lockstep
  std::vector<OpponentLaw> laws(1);
  laws[0].state = joint.pos[1];
  laws[0].weights = Eigen::VectorXd::Ones(1);
  laws[0].mass = 1.0;
  Rng rng(12);
  CHECK(joint_safety_lcb(joint, 0, 0, laws, env, cfg, rng) == 0.0);
}

TEST_CASE("nested MC lc converges to the enumeration oracle") {
  EnvModel env = toy_env(0.09, 3.0);  // 3x3 map, sd = 0.3
  JointState joint{{Vec(1.2, 1.5), Vec(2.0, 1.4)}};
  Rng wrng(13);
  Eigen::VectorXd weights(4);
  for (int a = 0; a < 4; ++a) weights(a) = 0.25 + 0.15 * wrng.uniform();
  std::vector<OpponentLaw> laws(1);
  laws[0].state = joint.pos[1];
  laws[0].weights = weights;
  laws[0].mass = weights.sum();

  const double exact =
      oracles::lc_enumeration(env, joint.pos[0], 0, joint.pos[1], weights, 60);

  double err_m[3];
  const int ms[3] = {50, 200, 800};
  for (int i = 0; i < 3; ++i) {
    SafetyConfig cfg = toy_cfg(ms[i]);
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      Rng rng(mix_seed({14u, std::uint64_t(i), std::uint64_t(rep)}));
      const double mc = joint_safety_lcb(joint, 0, 0, laws, env, cfg, rng);
      worst = std::max(worst, std::abs(mc - exact));
    }
    err_m[i] = worst;
  }
  CHECK(err_m[1] < 0.1);
  CHECK(err_m[2] < 0.04);
}

TEST_CASE("lc never increases when the unsafe set grows") {
  EnvModel env = toy_env(0.1, 6.0);
  JointState joint{{Vec(2.0, 3.0), Vec(3.5, 3.0)}};
  std::vector<OpponentLaw> laws(1);
  laws[0].state = joint.pos[1];
  laws[0].weights = Eigen::VectorXd::Constant(4, 0.25);
  laws[0].mass = 1.0;
  const SafetyConfig cfg = toy_cfg(400);
  for (double small : {0.3, 0.6, 1.0}) {
    EnvModel tight = env, loose = env;
    tight.unsafe_joint.threshold = small;
    loose.unsafe_joint.threshold = small + 0.5;  // superset unsafe region
    Rng r1(15), r2(15);  // common random numbers
    const double lc_tight = joint_safety_lcb(joint, 0, 0, laws, tight, cfg, r1);
    const double lc_loose = joint_safety_lcb(joint, 0, 0, laws, loose, cfg, r2);
    CHECK(lc_loose <= lc_tight + 1e-12);
  }
}

TEST_CASE("assess_actions applies thresholds and stays internally consistent") {
  EnvModel env = toy_env(0.1);
  GPosterior gp(KernelSpec{1.5, 0.6, 0.2});
  for (double x = 0.5; x < 5.0; x += 0.5)
    for (double y = 0.5; y < 5.0; y += 0.5)
      gp.add(Vec(x, y), 0.5);
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  SafetyConfig cfg = toy_cfg(200);
  JointState joint{{Vec(2.5, 2.5), Vec(4.5, 4.5)}};
  std::vector<OpponentLaw> laws(1);
  laws[0].state = joint.pos[1];
  laws[0].weights = Eigen::VectorXd::Constant(4, 0.3);
  laws[0].mass = 1.2;

  Rng srng(16);
  const SafeReturnSet sset = compute_safe_return_set(
      gp, beta, env, [](const Vec&) { return true; }, cfg, 3, srng);
  Rng rng(17);
  const ActionAssessment as =
      assess_actions(joint, 0, gp, beta, sset, laws, env, cfg, 3, rng);

  CHECK(as.consistent_with(cfg));
  for (int a = 0; a < 4; ++a) {
    CHECK(as.return_prob(a) >= 0.0);
    CHECK(as.return_prob(a) <= 1.0);
    CHECK(as.joint_safe_lcb(a) >= 0.0);
    CHECK(as.joint_safe_lcb(a) <= 1.0);
    CHECK(std::isfinite(as.lower_reward(a)));
    CHECK(as.safe[size_t(a)] ==
          (as.hi_rew[size_t(a)] && as.joint_safe[size_t(a)]));
  }
}

TEST_CASE("threshold application on a two-action example") {
  // lr = (0.2, -0.8), return = (1, 1), lc = (0.9, 0.9) under
  // h = -0.5, tau = 1, c = 0.7 leaves only action 0 safe.
  ActionAssessment as;
  as.lower_reward = Eigen::VectorXd(2);
  as.lower_reward << 0.2, -0.8;
  as.return_prob = Eigen::VectorXd::Ones(2);
  as.joint_safe_lcb = Eigen::VectorXd::Constant(2, 0.9);
  as.mean_sigma = Eigen::VectorXd::Zero(2);
  SafetyConfig cfg = toy_cfg();
  as.hi_rew = {1, 0};
  as.joint_safe = {1, 1};
  as.safe = {1, 0};
  as.n_safe = 1;
  CHECK(as.consistent_with(cfg));

  // All lc below c empties the joint-safe set.
  as.joint_safe_lcb = Eigen::VectorXd::Constant(2, 0.5);
  as.joint_safe = {0, 0};
  as.safe = {0, 0};
  as.n_safe = 0;
  CHECK(as.consistent_with(cfg));
}

TEST_CASE("zero-noise reductions for return and lc") {
  EnvModel env = toy_env(0.0);
  const SafetyConfig cfg = toy_cfg(64);
  SafeReturnSet half = half_plane_set(env, 2.0);
  Rng rng(18);
  // Nominal lands at (1.5, 3.5): inside the member half-plane.
  CHECK(returnability(Vec(1.5, 2.5), 0, half, env, cfg, rng) == 1.0);
  // Nominal at (3.5, 3.5): outside.
  CHECK(returnability(Vec(3.5, 2.5), 0, half, env, cfg, rng) == 0.0);

  JointState joint{{Vec(1.0, 1.0), Vec(4.0, 4.0)}};
  std::vector<OpponentLaw> laws(1);
  laws[0].state = joint.pos[1];
  laws[0].weights = Eigen::VectorXd::Constant(4, 0.25);
  laws[0].mass = 1.0;
  // Distance stays far above the collision threshold for every outcome.
  CHECK(joint_safety_lcb(joint, 0, 0, laws, env, cfg, rng) == 1.0);
}
