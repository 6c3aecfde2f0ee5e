#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "masq/geometry.hpp"

namespace masq {

/// Feed-forward action-value approximator: input -> 50 -> 50 -> |A|,
/// tanh hidden activations, linear head. Inputs are raw domain coordinates;
/// an affine transform derived from the domain box maps them to [-1, 1]
/// before the first layer. Hidden weights use a scaled-uniform fan-in
/// initialization from the seeded stream; the output layer starts at zero.
class Approximator {
 public:
  static constexpr int kHidden = 50;

  Approximator(int input_dim, int n_actions, std::uint64_t seed,
               const Box* input_box = nullptr);

  /// Q values over all actions for raw coordinates x.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  double max_q(const Eigen::VectorXd& x) const { return forward(x).maxCoeff(); }

  /// Mean squared residual 1/B * sum (Q(x_i)[a_i] - y_i)^2 and, if grad is
  /// non-null, its gradient in the flattened parameter vector.
  double loss_and_grad(const Eigen::MatrixXd& xs, std::span<const int> actions,
                       const Eigen::VectorXd& targets,
                       Eigen::VectorXd* grad) const;

  int param_count() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

  int input_dim() const { return int(w1_.cols()); }
  int n_actions() const { return int(w3_.rows()); }

 private:
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
    return (x - in_offset_).cwiseProduct(in_scale_);
  }

  Eigen::MatrixXd w1_, w2_, w3_;
  Eigen::VectorXd b1_, b2_, b3_;
  Eigen::VectorXd in_scale_, in_offset_;
};

struct TdConfig {
  double gamma = 0.9;
  double step_size = 1e-3;
  double grad_clip = 10.0;
  int target_sync_period = 100;  // Delta

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("gamma must lie in (0,1)");
    if (target_sync_period < 1)
      throw std::invalid_argument("target sync period must be >= 1");
  }
};

struct Transition {
  Eigen::VectorXd s, s_next;  // raw coordinates
  int a = 0;
  double reward_obs = 0.0;
};

/// Head order within the triple.
enum : int { kHeadMu = 0, kHeadUp = 1, kHeadLo = 2 };

/// Per-transition reward triple used for TD targets, indexed by head:
/// {r_mu, r_up, r_lo} evaluated at the transition's next state.
using BoundsFn = std::function<std::array<double, 3>(const Transition&)>;

/// Three parallel action-value estimators (mean, upper, lower) with delayed
/// target copies synchronized every target_sync_period update steps.
class QTriple {
 public:
  QTriple(int input_dim, int n_actions, std::uint64_t seed, const Box* box,
          TdConfig cfg = {});

  /// (Q_mu, Q_up, Q_lo) at (state, action).
  std::array<double, 3> q_eval(const Eigen::VectorXd& s, int a) const;

  Eigen::VectorXd q_mu(const Eigen::VectorXd& s) const { return live_[kHeadMu].forward(s); }
  Eigen::VectorXd q_up(const Eigen::VectorXd& s) const { return live_[kHeadUp].forward(s); }
  Eigen::VectorXd q_lo(const Eigen::VectorXd& s) const { return live_[kHeadLo].forward(s); }

  /// One gradient step per head against frozen targets; syncs the target
  /// copies after every target_sync_period accumulated steps. Throws on a
  /// non-finite loss.
  void td_update(std::span<const Transition> batch, const BoundsFn& bounds);

  /// TD loss of one head on a batch, as a function of the live parameters
  /// with targets held frozen. Exposed for gradient verification.
  double td_loss(int head, std::span<const Transition> batch,
                 const BoundsFn& bounds, Eigen::VectorXd* grad = nullptr) const;

  Approximator& head(int i) { return live_[size_t(i)]; }
  const Approximator& head(int i) const { return live_[size_t(i)]; }
  const Approximator& target(int i) const { return target_[size_t(i)]; }
  void sync_targets();

  const TdConfig& config() const { return cfg_; }
  TdConfig& config() { return cfg_; }
  int n_actions() const { return live_[0].n_actions(); }
  int steps_since_sync() const { return steps_since_sync_; }

 private:
  std::vector<Approximator> live_;
  std::vector<Approximator> target_;
  TdConfig cfg_;
  int steps_since_sync_ = 0;
};

/// Finite MDP with reward on the destination state: transitions[a](s, s') is
/// the probability of reaching s' from s under action a.
struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Eigen::MatrixXd> transitions;

  void validate() const;
};

struct RewardTriple {
  Eigen::VectorXd r_mu, r_up, r_lo;  // per state
};

/// Exact tabular action-value triple; fixed point of the Bellman optimality
/// recursion for each reward bound.
struct TabularQ {
  Eigen::MatrixXd q_mu, q_up, q_lo;  // state x action
  double gamma = 0.9;
};

/// Value iteration to sup-norm tolerance for each of the three reward
/// functions. Throws on non-convergence after max_sweeps.
TabularQ solve_tabular(const FiniteMdp& mdp, const RewardTriple& rewards,
                       double gamma, double tol = 1e-9,
                       int max_sweeps = 100000);

}  // namespace masq
