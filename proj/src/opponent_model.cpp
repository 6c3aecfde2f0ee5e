#include "masq/opponent_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace masq {

Eigen::VectorXd softmax_temperature(const Eigen::VectorXd& q, double temp) {
  if (!(temp > 0.0)) throw std::invalid_argument("softmax: temperature <= 0");
  const Eigen::ArrayXd scaled = q.array() / temp;
  const Eigen::ArrayXd ex = (scaled - scaled.maxCoeff()).exp();
  return (ex / ex.sum()).matrix();
}

namespace {

// upper(a) = e(a) / (e(a) + sum_{a' != a} d(a')) where e = exp(num/T) and
// d = exp(den/T), stabilized by the joint maximum.
Eigen::VectorXd swapped_denominator_upper(const Eigen::VectorXd& numer_q,
                                          const Eigen::VectorXd& denom_q,
                                          double temp) {
  const Eigen::ArrayXd ns = numer_q.array() / temp;
  const Eigen::ArrayXd ds = denom_q.array() / temp;
  const double m = std::max(ns.maxCoeff(), ds.maxCoeff());
  const Eigen::ArrayXd en = (ns - m).exp();
  const Eigen::ArrayXd ed = (ds - m).exp();
  const double ed_sum = ed.sum();
  Eigen::VectorXd out(numer_q.size());
  for (Eigen::Index a = 0; a < numer_q.size(); ++a)
    out(a) = en(a) / (en(a) + (ed_sum - ed(a)));
  return out;
}

}  // namespace

PolicyPair ofu_probs(const Eigen::VectorXd& q_up, const Eigen::VectorXd& q_mu,
                     double temp_ofu) {
  PolicyPair p;
  p.probs = softmax_temperature(q_up, temp_ofu);
  p.upper = swapped_denominator_upper(q_up, q_mu, temp_ofu);
  return p;
}

PolicyPair boltzmann_probs(const Eigen::VectorXd& q_mu,
                           const Eigen::VectorXd& q_lo, double temp_boltz) {
  PolicyPair p;
  p.probs = softmax_temperature(q_mu, temp_boltz);
  p.upper = swapped_denominator_upper(q_mu, q_lo, temp_boltz);
  return p;
}

Eigen::VectorXd mixture_weights(const PolicyPair& ofu, const PolicyPair& boltz,
                                double eps, bool upper) {
  if (upper) return eps * ofu.upper + (1.0 - eps) * boltz.upper;
  return eps * ofu.probs + (1.0 - eps) * boltz.probs;
}

void TrajectoryLog::append(const Vec& s, int a, const Vec& s_next,
                           std::int64_t t) {
  if (t <= last_t_)
    throw std::invalid_argument("trajectory times must strictly increase");
  last_t_ = t;
  steps_.push_back({s, a, s_next, t});
  if (int(steps_.size()) > window_)
    steps_.erase(steps_.begin(), steps_.begin() + (steps_.size() - size_t(window_)));
}

namespace {

struct PolicyAt {
  PolicyPair ofu, boltz;
};

PolicyAt policies_at(const QTriple& q, const Vec& s, const PolicyParams& p) {
  Eigen::VectorXd x(s.dim);
  for (int i = 0; i < s.dim; ++i) x(i) = s[i];
  const Eigen::VectorXd qu = q.q_up(x);
  const Eigen::VectorXd qm = q.q_mu(x);
  const Eigen::VectorXd ql = q.q_lo(x);
  return {ofu_probs(qu, qm, p.temp_ofu), boltzmann_probs(qm, ql, p.temp_boltz)};
}

}  // namespace

Eigen::VectorXd OpponentModel::action_probs(const Vec& s) const {
  const PolicyAt at = policies_at(*q_, s, params_);
  return mixture_weights(at.ofu, at.boltz, params_.eps, /*upper=*/false);
}

std::pair<Eigen::VectorXd, double> OpponentModel::action_weights_upper(
    const Vec& s) const {
  const PolicyAt at = policies_at(*q_, s, params_);
  Eigen::VectorXd w = mixture_weights(at.ofu, at.boltz, params_.eps, /*upper=*/true);
  return {w, w.sum()};
}

double OpponentModel::g(const Vec& s, const Vec& s_next, const EnvModel& env,
                        bool upper_bound) const {
  const Eigen::VectorXd w =
      upper_bound ? action_weights_upper(s).first : action_probs(s);
  double total = 0.0;
  for (int a = 0; a < env.n_actions(); ++a)
    total += w(a) * env.transition_density(s_next, s, a);
  return total;
}

namespace {

// Probability of the chosen action under softmax(q/T) without materializing
// the distribution; anchoring at q[a] keeps the exponents bounded above by 0
// only when a is the argmax, but every term stays finite for T > 0.
inline double chosen_action_prob(const Eigen::MatrixXd& rows, int i, int a,
                                 double inv_temp) {
  const int n = int(rows.cols());
  const double qa = rows(i, a);
  double denom = 0.0;
  for (int j = 0; j < n; ++j) denom += std::exp((rows(i, j) - qa) * inv_temp);
  return 1.0 / denom;
}

}  // namespace

double log_likelihood_cached(std::span<const int> actions,
                             const Eigen::MatrixXd& q_up_rows,
                             const Eigen::MatrixXd& q_mu_rows,
                             const PolicyParams& params) {
  params.validate();
  const double inv_to = 1.0 / params.temp_ofu;
  const double inv_tb = 1.0 / params.temp_boltz;
  double ll = 0.0;
  for (int i = 0; i < int(actions.size()); ++i) {
    const int a = actions[size_t(i)];
    const double po = chosen_action_prob(q_up_rows, i, a, inv_to);
    const double pb = chosen_action_prob(q_mu_rows, i, a, inv_tb);
    ll += std::log(params.eps * po + (1.0 - params.eps) * pb);
  }
  return ll;
}

namespace {

void cache_q_rows(const TrajectoryLog& traj, const QTriple& q,
                  std::vector<int>& actions, Eigen::MatrixXd& q_up_rows,
                  Eigen::MatrixXd& q_mu_rows) {
  const int n = traj.size();
  actions.resize(size_t(n));
  q_up_rows.resize(n, q.n_actions());
  q_mu_rows.resize(n, q.n_actions());
  for (int i = 0; i < n; ++i) {
    const TrajStep& st = traj.steps()[size_t(i)];
    Eigen::VectorXd x(st.s.dim);
    for (int d = 0; d < st.s.dim; ++d) x(d) = st.s[d];
    q_up_rows.row(i) = q.q_up(x).transpose();
    q_mu_rows.row(i) = q.q_mu(x).transpose();
    actions[size_t(i)] = st.a;
  }
}

// Golden-section maximization on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi,
                  int iters = 12) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  return f1 >= f2 ? x1 : x2;
}

constexpr double kTempLo = 0.02;
constexpr double kTempHi = 20.0;

}  // namespace

PolicyParams infer_params_cached(std::span<const int> actions,
                                 const Eigen::MatrixXd& q_up_rows,
                                 const Eigen::MatrixXd& q_mu_rows) {
  if (actions.empty())
    throw std::invalid_argument("infer_params: empty trajectory");
  const int n = int(actions.size());

  static const std::vector<double> temp_grid = {0.05, 0.1, 0.25, 0.5,
                                                1.0,  2.0, 5.0,  10.0};
  const int n_temps = int(temp_grid.size());

  // Per-temperature probability of each observed action; softmaxes are
  // independent of eps so the grid scan reuses them.
  Eigen::MatrixXd po(n, n_temps), pb(n, n_temps);
  for (int ti = 0; ti < n_temps; ++ti) {
    for (int i = 0; i < n; ++i) {
      po(i, ti) = softmax_temperature(q_up_rows.row(i).transpose(),
                                      temp_grid[size_t(ti)])(actions[size_t(i)]);
      pb(i, ti) = softmax_temperature(q_mu_rows.row(i).transpose(),
                                      temp_grid[size_t(ti)])(actions[size_t(i)]);
    }
  }

  PolicyParams best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int ei = 0; ei <= 10; ++ei) {
    const double eps = 0.1 * ei;
    for (int to = 0; to < n_temps; ++to) {
      for (int tb = 0; tb < n_temps; ++tb) {
        double ll = 0.0;
        for (int i = 0; i < n; ++i)
          ll += std::log(eps * po(i, to) + (1.0 - eps) * pb(i, tb));
        if (ll > best_ll) {
          best_ll = ll;
          best = {eps, temp_grid[size_t(to)], temp_grid[size_t(tb)]};
        }
      }
    }
  }

  const auto ll_at = [&](const PolicyParams& p) {
    return log_likelihood_cached(actions, q_up_rows, q_mu_rows, p);
  };

  // Coordinate descent; temperatures are searched in log space.
  PolicyParams cur = best;
  for (int it = 0; it < 20; ++it) {
    switch (it % 3) {
      case 0:
        cur.eps = golden_max(
            [&](double e) {
              PolicyParams p = cur;
              p.eps = e;
              return ll_at(p);
            },
            0.0, 1.0);
        break;
      case 1:
        cur.temp_ofu = std::exp(golden_max(
            [&](double lt) {
              PolicyParams p = cur;
              p.temp_ofu = std::exp(lt);
              return ll_at(p);
            },
            std::log(kTempLo), std::log(kTempHi)));
        break;
      default:
        cur.temp_boltz = std::exp(golden_max(
            [&](double lt) {
              PolicyParams p = cur;
              p.temp_boltz = std::exp(lt);
              return ll_at(p);
            },
            std::log(kTempLo), std::log(kTempHi)));
        break;
    }
  }
  if (ll_at(cur) >= best_ll) best = cur;
  best.validate();
  return best;
}

double log_likelihood(const TrajectoryLog& traj, const PolicyParams& params,
                      const QTriple& q) {
  if (traj.empty()) throw std::invalid_argument("log_likelihood: empty trajectory");
  std::vector<int> actions;
  Eigen::MatrixXd qu, qm;
  cache_q_rows(traj, q, actions, qu, qm);
  return log_likelihood_cached(actions, qu, qm, params);
}

PolicyParams infer_params(const TrajectoryLog& traj, const QTriple& q) {
  if (traj.empty()) throw std::invalid_argument("infer_params: empty trajectory");
  std::vector<int> actions;
  Eigen::MatrixXd qu, qm;
  cache_q_rows(traj, q, actions, qu, qm);
  return infer_params_cached(actions, qu, qm);
}

}  // namespace masq
