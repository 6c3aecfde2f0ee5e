#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "masq/environment.hpp"
#include "masq/gp_reward.hpp"
#include "masq/opponent_model.hpp"
#include "masq/rng.hpp"

namespace masq {

struct SafetyConfig {
  double h = -0.5;   // individual safety threshold, reward units
  double tau = 1.0;  // returnability threshold in [0,1]
  double c = 0.7;    // joint-safety threshold in [0,1]
  int mc_samples = 32;           // M per integral
  double lattice_spacing = 1.0;  // rho, meters
  int fixed_point_cap = 50;      // J

  void validate() const {
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
    if (!(lattice_spacing > 0.0))
      throw std::invalid_argument("lattice spacing must be positive");
    if (fixed_point_cap < 1)
      throw std::invalid_argument("fixed-point cap must be >= 1");
    if (!(tau >= 0.0 && tau <= 1.0) || !(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("tau and c must lie in [0,1]");
  }
};

/// With tau = 1, Gaussian transitions can never certify probability-one
/// return; the test becomes "all M samples land in the set".
inline bool return_passes(double return_prob, double tau) {
  if (tau >= 1.0) return return_prob >= 1.0 - 1e-9;
  return return_prob > tau;
}

/// Uniform discretization of the domain box at a given spacing.
class Lattice {
 public:
  Lattice() = default;
  Lattice(const Box& box, double spacing);

  int size() const { return total_; }
  int dim() const { return dim_; }
  double spacing() const { return rho_; }
  const Box& box() const { return box_; }

  int cell_of(const Vec& p) const;  // p is clamped into the box
  Vec center(int idx) const;

 private:
  Box box_;
  double rho_ = 1.0;
  std::array<int, 3> n_{1, 1, 1};
  int dim_ = 2;
  int total_ = 1;
};

/// Safe-and-returnable set on the lattice at generation time t.
struct SafeReturnSet {
  Lattice lattice;
  std::vector<char> member;
  std::int64_t t = 0;

  bool contains(const Vec& p) const {
    return member[size_t(lattice.cell_of(p))] != 0;
  }
  int count() const;
};

using RegionPred = std::function<bool(const Vec&)>;

/// Lower confidence bound on the expected next-state reward: the mean of
/// r_lo over mc_samples transition draws.
double reward_lcb(const Vec& state, int action_index, const GPosterior& gp,
                  const BetaSchedule& schedule, std::int64_t t,
                  const EnvModel& env, const SafetyConfig& cfg, Rng& rng);

/// Same integral on pre-drawn noise vectors (common random numbers).
double reward_lcb_with_noise(const Vec& state, int action_index,
                             const GPosterior& gp, const BetaSchedule& schedule,
                             std::int64_t t, const EnvModel& env,
                             std::span<const Vec> noise);

/// Fixed point of the safe-return recursion: starting from the cells of s0,
/// repeatedly add cells from which some action returns into the current set
/// with probability passing tau while its discretized reward bound clears h.
/// Cell membership is decided at cell centers; r_lo is evaluated once per
/// cell and return probabilities use per-iteration Monte-Carlo estimates
/// shared across cells and actions.
SafeReturnSet compute_safe_return_set(const GPosterior& gp,
                                      const BetaSchedule& schedule,
                                      const EnvModel& env,
                                      const RegionPred& s0,
                                      const SafetyConfig& cfg, std::int64_t t,
                                      Rng& rng);

/// Probability that one transition lands inside the safe-return set.
double returnability(const Vec& state, int action_index,
                     const SafeReturnSet& sset, const EnvModel& env,
                     const SafetyConfig& cfg, Rng& rng);

double returnability_with_noise(const Vec& state, int action_index,
                                const SafeReturnSet& sset, const EnvModel& env,
                                std::span<const Vec> noise);

/// One opponent's next-transition law for the joint-safety integral: action
/// weights at its current state (mass may exceed 1 in upper-bound mode).
struct OpponentLaw {
  Vec state;
  Eigen::VectorXd weights;
  double mass = 1.0;
};

/// Lower confidence bound on avoiding every jointly unsafe outcome at the
/// next step: nested Monte Carlo with an outer loop over own-transition
/// samples and, per outer sample, a fresh inner loop of joint opponent
/// transitions. The per-outer unsafe probability is scaled by the weight
/// mass and clipped, so the result lies in [0,1].
double joint_safety_lcb(const JointState& joint, int own_index,
                        int own_action_index,
                        std::span<const OpponentLaw> laws, const EnvModel& env,
                        const SafetyConfig& cfg, Rng& rng);

/// Core on pre-drawn own outcomes; inner opponent draws come from rng.
double joint_safety_lcb_with_outcomes(const JointState& joint, int own_index,
                                      std::span<const Vec> own_outcomes,
                                      std::span<const OpponentLaw> laws,
                                      const EnvModel& env, int inner_samples,
                                      Rng& rng);

/// Builds upper-bound laws from opponent models at their current states.
std::vector<OpponentLaw> upper_bound_laws(const JointState& joint,
                                          int own_index,
                                          std::span<const OpponentModel> models);

/// Certificates and derived action sets for every action at one state.
struct ActionAssessment {
  Eigen::VectorXd lower_reward;    // lr per action
  Eigen::VectorXd return_prob;     // return per action
  Eigen::VectorXd joint_safe_lcb;  // lc per action
  Eigen::VectorXd mean_sigma;      // GP sigma averaged over the lr samples
  std::vector<char> hi_rew, joint_safe, safe;
  int n_safe = 0;

  /// Fallback choice: maximal lc at the Monte-Carlo estimator's resolution
  /// (values within one grain compare equal), ties broken by the higher
  /// reward certificate, then the lowest index.
  int argmax_joint_safe(double grain = 0.05) const;
  bool consistent_with(const SafetyConfig& cfg) const;
};

/// Evaluates lr / return / lc for every action with common random numbers
/// shared across the per-action loop, then applies the thresholds.
ActionAssessment assess_actions(const JointState& joint, int own_index,
                                const GPosterior& gp,
                                const BetaSchedule& schedule,
                                const SafeReturnSet& sset,
                                std::span<const OpponentLaw> laws,
                                const EnvModel& env, const SafetyConfig& cfg,
                                std::int64_t t, Rng& rng);

}  // namespace masq
