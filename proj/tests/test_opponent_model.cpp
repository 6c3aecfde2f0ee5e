#include <doctest.h>

#include <cmath>

#include "masq/opponent_model.hpp"
#include "masq/presets.hpp"

using namespace masq;

namespace {

Eigen::VectorXd vec4(double a, double b, double c, double d) {
  Eigen::VectorXd v(4);
  v << a, b, c, d;
  return v;
}

// Draws actions from the exact mixture policy for given Q rows.
std::vector<int> sample_actions(const Eigen::MatrixXd& qu,
                                const Eigen::MatrixXd& qm,
                                const PolicyParams& params, Rng& rng) {
  std::vector<int> actions;
  for (int i = 0; i < qu.rows(); ++i) {
    const Eigen::VectorXd po =
        softmax_temperature(qu.row(i).transpose(), params.temp_ofu);
    const Eigen::VectorXd pb =
        softmax_temperature(qm.row(i).transpose(), params.temp_boltz);
    const Eigen::VectorXd mix = params.eps * po + (1.0 - params.eps) * pb;
    std::span<const double> w(mix.data(), size_t(mix.size()));
    actions.push_back(rng.categorical(w, 1.0));
  }
  return actions;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> random_q_rows(int steps,
                                                          int n_actions,
                                                          Rng& rng,
                                                          double spread = 2.0) {
  Eigen::MatrixXd qm(steps, n_actions), qu(steps, n_actions);
  for (int i = 0; i < steps; ++i)
    for (int a = 0; a < n_actions; ++a) {
      qm(i, a) = rng.uniform(-spread, spread);
      qu(i, a) = qm(i, a) + rng.uniform(0.0, spread);
    }
  return {qu, qm};
}

}  // namespace

TEST_CASE("uniform Q gives uniform OFU and Boltzmann policies") {
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(4, 3.0);
  const PolicyPair ofu = ofu_probs(q, q, 0.7);
  const PolicyPair boltz = boltzmann_probs(q, q, 2.0);
  for (int a = 0; a < 4; ++a) {
    CHECK(ofu.probs(a) == doctest::Approx(0.25));
    CHECK(boltz.probs(a) == doctest::Approx(0.25));
  }
}

TEST_CASE("closed-form OFU upper bound with two actions") {
  Eigen::VectorXd qu(2), qm(2);
  qu << 1.0, 0.0;
  qm << 0.0, 0.0;
  const PolicyPair p = ofu_probs(qu, qm, 1.0);
  const double e = std::exp(1.0);
  CHECK(p.upper(0) == doctest::Approx(e / (1.0 + e)).epsilon(1e-5));
  CHECK(p.upper(0) == doctest::Approx(0.73106).epsilon(1e-4));
}

TEST_CASE("upper bounds dominate the exact policies elementwise") {
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + rng.uniform_int(5);
    Eigen::VectorXd qm(n), qu(n), ql(n);
    for (int a = 0; a < n; ++a) {
      qm(a) = rng.uniform(-3.0, 3.0);
      const double gap = rng.uniform(0.0, 2.0);
      qu(a) = qm(a) + gap;
      ql(a) = qm(a) - gap;
    }
    const double temp = std::exp(rng.uniform(std::log(0.05), std::log(10.0)));
    const PolicyPair ofu = ofu_probs(qu, qm, temp);
    const PolicyPair boltz = boltzmann_probs(qm, ql, temp);
    for (int a = 0; a < n; ++a) {
      CHECK(ofu.upper(a) >= ofu.probs(a) - 1e-12);
      CHECK(boltz.upper(a) >= boltz.probs(a) - 1e-12);
    }
    CHECK(ofu.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(boltz.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::VectorXd mix =
        mixture_weights(ofu, boltz, rng.uniform(), false);
    CHECK(mix.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("Boltzmann approaches argmax as the temperature vanishes") {
  Eigen::VectorXd q(2);
  q << 2.0, 1.0;
  const Eigen::VectorXd p = softmax_temperature(q, 1e-3);
  CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p(1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("softmax is shift invariant and temperature-scale covariant") {
  Eigen::VectorXd a(2), b(2);
  a << 2.0, 1.0;
  b << 3.0, 2.0;
  const Eigen::VectorXd pa = softmax_temperature(a, 0.6);
  const Eigen::VectorXd pb = softmax_temperature(b, 0.6);
  CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd q(4);
    for (int i = 0; i < 4; ++i) q(i) = rng.uniform(-2.0, 2.0);
    const double temp = rng.uniform(0.1, 3.0);
    const double scale = rng.uniform(0.2, 5.0);
    const Eigen::VectorXd p1 = softmax_temperature(q, temp);
    const Eigen::VectorXd p2 = softmax_temperature(q / scale, temp / scale);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("g collapses to the transition density with a single action") {
  EnvModel env = make_rover_env(synthetic_terrain(1, 10.0, 0.5), 10.0);
  env.actions = {Vec(0.0, 1.0)};
  const Box box = env.bounds;
  QTriple q(2, 1, 5, &box);
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const OpponentModel model(&q, &beta, {0.3, 0.9, 1.4});
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec s = env.bounds.sample(rng), n = env.bounds.sample(rng);
    CHECK(model.g(s, n, env, false) ==
          doctest::Approx(env.transition_density(n, s, 0)));
    CHECK(model.g(s, n, env, true) ==
          doctest::Approx(env.transition_density(n, s, 0)));
  }
}

TEST_CASE("mixture endpoints select a single strategy") {
  EnvModel env = make_rover_env(synthetic_terrain(1, 10.0, 0.5), 10.0);
  const Box box = env.bounds;
  QTriple q(2, 4, 6, &box);
  // Distinct heads so OFU and Boltzmann weights differ.
  Rng perturb(9);
  for (int h = 0; h < 3; ++h) {
    Eigen::VectorXd p = q.head(h).params();
    for (Eigen::Index i = p.size() - 204; i < p.size(); ++i)
      p(i) = perturb.uniform(-0.5, 0.5);
    q.head(h).set_params(p);
  }
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const Vec s(4.0, 4.0);
  Eigen::VectorXd x(2);
  x << s[0], s[1];

  const OpponentModel pure_ofu(&q, &beta, {1.0, 0.8, 1.7});
  const Eigen::VectorXd w_ofu = pure_ofu.action_probs(s);
  CHECK((w_ofu - softmax_temperature(q.q_up(x), 0.8)).cwiseAbs().maxCoeff() <
        1e-12);

  const OpponentModel pure_boltz(&q, &beta, {0.0, 0.8, 1.7});
  const Eigen::VectorXd w_b = pure_boltz.action_probs(s);
  CHECK((w_b - softmax_temperature(q.q_mu(x), 1.7)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("g integrates to one over next states (exact parameters)") {
  EnvModel env = make_rover_env(synthetic_terrain(1, 10.0, 0.5), 10.0);
  const Box box = env.bounds;
  QTriple q(2, 4, 8, &box);
  const BetaSchedule beta = BetaSchedule::constant(2.0);
  const OpponentModel model(&q, &beta, {0.4, 0.5, 0.8});
  const Vec s(2.2, 7.7);
  Rng rng(4);
  const int n = 400000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    sum += model.g(s, env.bounds.sample(rng), env, false);
  CHECK(env.bounds.volume() * sum / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("trajectory log enforces increasing times and the window") {
  TrajectoryLog log(3);
  log.append(Vec(0.0, 0.0), 0, Vec(0.0, 1.0), 0);
  CHECK_THROWS_AS(log.append(Vec(0.0, 0.0), 0, Vec(0.0, 1.0), 0),
                  std::invalid_argument);
  for (int t = 1; t < 6; ++t) log.append(Vec(0.0, 0.0), 0, Vec(0.0, 1.0), t);
  CHECK(log.size() == 3);
  CHECK(log.steps().front().t == 3);
}

TEST_CASE("uniform single-step likelihood equals log(1/4)") {
  Eigen::MatrixXd qu = Eigen::MatrixXd::Zero(1, 4);
  Eigen::MatrixXd qm = Eigen::MatrixXd::Zero(1, 4);
  const int actions[] = {2};
  const double ll = log_likelihood_cached(actions, qu, qm, {0.5, 1.0, 1.0});
  CHECK(ll == doctest::Approx(std::log(0.25)));
}

TEST_CASE("likelihood is invariant to constant Q shifts") {
  Rng rng(5);
  auto [qu, qm] = random_q_rows(40, 4, rng);
  std::vector<int> actions;
  for (int i = 0; i < 40; ++i) actions.push_back(rng.uniform_int(4));
  const PolicyParams p{0.4, 0.7, 1.3};
  const double base = log_likelihood_cached(actions, qu, qm, p);
  const double shifted = log_likelihood_cached(
      actions, (qu.array() + 11.0).matrix(), (qm.array() + 11.0).matrix(), p);
  CHECK(base == doctest::Approx(shifted).epsilon(1e-12));
}

TEST_CASE("likelihood is continuous in the parameters") {
  Rng rng(6);
  auto [qu, qm] = random_q_rows(60, 4, rng);
  std::vector<int> actions;
  for (int i = 0; i < 60; ++i) actions.push_back(rng.uniform_int(4));
  const PolicyParams p{0.5, 0.8, 0.8};
  const double base = log_likelihood_cached(actions, qu, qm, p);
  for (double d : {1e-6, 1e-7}) {
    const double moved =
        log_likelihood_cached(actions, qu, qm, {p.eps + d, p.temp_ofu + d,
                                                p.temp_boltz + d});
    CHECK(std::abs(moved - base) < 1e-2);
  }
}

TEST_CASE("generating parameters beat perturbed ones on synthetic data") {
  int wins = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(mix_seed({100u, std::uint64_t(trial)}));
    auto [qu, qm] = random_q_rows(500, 4, rng);
    const PolicyParams truth{0.3, 0.5, 1.0};
    const std::vector<int> actions = sample_actions(qu, qm, truth, rng);
    const double ll_true = log_likelihood_cached(actions, qu, qm, truth);
    const PolicyParams off{0.9, 2.5, 0.1};
    const double ll_off = log_likelihood_cached(actions, qu, qm, off);
    wins += ll_true >= ll_off ? 1 : 0;
  }
  CHECK(wins >= int(0.95 * trials));
}

TEST_CASE("MLE recovers the likelihood of a pure Boltzmann generator") {
  Rng rng(7);
  auto [qu, qm] = random_q_rows(500, 4, rng);
  const PolicyParams truth{0.0, 1.0, 0.5};
  const std::vector<int> actions = sample_actions(qu, qm, truth, rng);
  const PolicyParams fit = infer_params_cached(actions, qu, qm);
  const double ll_true = log_likelihood_cached(actions, qu, qm, truth);
  const double ll_fit = log_likelihood_cached(actions, qu, qm, fit);
  CHECK(ll_fit >= ll_true - 0.01 * std::abs(ll_true));
}

TEST_CASE("MLE recovers epsilon from eps-greedy data") {
  Rng rng(8);
  auto [qu, qm] = random_q_rows(500, 4, rng, 3.0);
  const PolicyParams truth{0.1, 1e3, 1e-3};
  std::vector<int> actions;
  for (int i = 0; i < 500; ++i) {
    if (rng.uniform() < truth.eps) {
      actions.push_back(rng.uniform_int(4));
    } else {
      int best = 0;
      for (int a = 1; a < 4; ++a)
        if (qm(i, a) > qm(i, best)) best = a;
      actions.push_back(best);
    }
  }
  const PolicyParams fit = infer_params_cached(actions, qu, qm);
  CHECK(fit.eps >= 0.02);
  CHECK(fit.eps <= 0.25);
}

TEST_CASE("one-step trajectory still yields valid parameters") {
  EnvModel env = make_rover_env(synthetic_terrain(1, 10.0, 0.5), 10.0);
  const Box box = env.bounds;
  QTriple q(2, 4, 10, &box);
  TrajectoryLog traj;
  traj.append(Vec(1.0, 1.0), 2, Vec(1.0, 2.0), 0);
  const PolicyParams fit = infer_params(traj, q);
  CHECK(fit.eps >= 0.0);
  CHECK(fit.eps <= 1.0);
  CHECK(fit.temp_ofu > 0.0);
  CHECK(fit.temp_boltz > 0.0);
}
