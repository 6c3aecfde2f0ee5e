#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "masq/environment.hpp"
#include "masq/gp_reward.hpp"
#include "masq/q_estimator.hpp"

namespace masq {

/// Parameters of the combined exploration policy: OFU with probability eps,
/// Boltzmann with probability 1 - eps.
struct PolicyParams {
  double eps = 0.5;
  double temp_ofu = 1.0;
  double temp_boltz = 1.0;

  void validate() const {
    if (!(eps >= 0.0 && eps <= 1.0) || !(temp_ofu > 0.0) || !(temp_boltz > 0.0) ||
        !std::isfinite(eps) || !std::isfinite(temp_ofu) || !std::isfinite(temp_boltz))
      throw std::invalid_argument("policy params out of range");
  }
};

/// softmax(q / temp) with max subtraction.
Eigen::VectorXd softmax_temperature(const Eigen::VectorXd& q, double temp);

struct PolicyPair {
  Eigen::VectorXd probs;  // exact distribution, sums to 1
  Eigen::VectorXd upper;  // per-action upper bound, >= probs elementwise
};

/// OFU policy over the upper Q bound; the upper bound of each action's
/// probability swaps every other action's Q_up for Q_mu in the denominator.
PolicyPair ofu_probs(const Eigen::VectorXd& q_up, const Eigen::VectorXd& q_mu,
                     double temp_ofu);

/// Boltzmann policy over the mean Q; the upper bound swaps every other
/// action's Q_mu for Q_lo in the denominator.
PolicyPair boltzmann_probs(const Eigen::VectorXd& q_mu,
                           const Eigen::VectorXd& q_lo, double temp_boltz);

/// eps-mixture of the two policies; with upper=true both components use
/// their per-action upper bounds (the result is a super-distribution).
Eigen::VectorXd mixture_weights(const PolicyPair& ofu, const PolicyPair& boltz,
                                double eps, bool upper);

struct TrajStep {
  Vec s;
  int a = 0;
  Vec s_next;
  std::int64_t t = 0;
};

/// Sliding window of one opponent's observed transitions.
class TrajectoryLog {
 public:
  explicit TrajectoryLog(int window = 500) : window_(window) {}

  void append(const Vec& s, int a, const Vec& s_next, std::int64_t t);
  std::span<const TrajStep> steps() const { return steps_; }
  int size() const { return int(steps_.size()); }
  bool empty() const { return steps_.empty(); }

 private:
  int window_;
  std::int64_t last_t_ = -1;
  std::vector<TrajStep> steps_;
};

/// Belief about one other agent: combined-policy parameters over a shared
/// QTriple. g composes the policy with the transition kernel.
class OpponentModel {
 public:
  OpponentModel(const QTriple* shared_q, const BetaSchedule* beta,
                PolicyParams init = {})
      : q_(shared_q), beta_(beta), params_(init) {
    params_.validate();
  }

  const PolicyParams& params() const { return params_; }
  void set_params(PolicyParams p) {
    p.validate();
    params_ = p;
  }
  const QTriple& shared_q() const { return *q_; }
  const BetaSchedule& beta() const { return *beta_; }

  /// Exact mixture distribution over the opponent's actions at state s.
  Eigen::VectorXd action_probs(const Vec& s) const;

  /// Upper-bound mixture weights and their total mass (>= 1).
  std::pair<Eigen::VectorXd, double> action_weights_upper(const Vec& s) const;

  /// Transition probability density under the combined policy:
  /// sum_a w(a) f(s_next | s, a). With upper_bound the policy weights are the
  /// per-action upper bounds, giving a value >= the exact-parameter one.
  double g(const Vec& s, const Vec& s_next, const EnvModel& env,
           bool upper_bound = true) const;

 private:
  const QTriple* q_;
  const BetaSchedule* beta_;
  PolicyParams params_;
};

/// Log-likelihood of the observed actions under the combined policy
/// (action-level; transitions do not enter).
double log_likelihood(const TrajectoryLog& traj, const PolicyParams& params,
                      const QTriple& q);

/// Cached-row variant: q_up_rows and q_mu_rows hold one row of Q values per
/// trajectory step.
double log_likelihood_cached(std::span<const int> actions,
                             const Eigen::MatrixXd& q_up_rows,
                             const Eigen::MatrixXd& q_mu_rows,
                             const PolicyParams& params);

/// Maximum-likelihood estimate of (eps, T_o, T_b): grid search followed by
/// coordinate-descent refinement with golden-section line searches.
PolicyParams infer_params(const TrajectoryLog& traj, const QTriple& q);

PolicyParams infer_params_cached(std::span<const int> actions,
                                 const Eigen::MatrixXd& q_up_rows,
                                 const Eigen::MatrixXd& q_mu_rows);

}  // namespace masq
