#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "masq/geometry.hpp"
#include "masq/rng.hpp"

namespace masq {

enum class Boundary { wrap, clamp };

/// Pairwise-distance predicate defining the jointly unsafe set.
struct JointUnsafeSpec {
  enum class Kind { min_pairwise_distance, max_pairwise_distance };
  Kind kind = Kind::min_pairwise_distance;
  double threshold = 0.1;  // meters

  void validate() const {
    if (!(threshold > 0.0))
      throw std::invalid_argument("joint-unsafe threshold must be positive");
  }
};

/// Hidden reward over the domain: a bilinear terrain grid or a distance
/// potential toward a target point.
class RewardField {
 public:
  RewardField() = default;

  /// altitudes are row-major with y ascending: altitudes[iy*nx + ix] is the
  /// node at (ix*cell_size, iy*cell_size).
  static RewardField grid_bilinear(int nx, int ny, double cell_size,
                                   std::vector<double> altitudes,
                                   double scale = 1.0);

  /// r(s) = offset - scale * |s - target|.
  static RewardField negative_distance(const Vec& target, double scale = 1.0,
                                       double offset = 0.0);

  double operator()(const Vec& p) const;

  bool is_grid() const { return kind_ == Kind::grid; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size() const { return cell_; }
  const std::vector<double>& altitudes() const { return alt_; }
  const Vec& target() const { return target_; }
  double scale() const { return scale_; }
  double offset() const { return offset_; }

 private:
  enum class Kind { grid, negdist };
  Kind kind_ = Kind::negdist;
  int nx_ = 0, ny_ = 0;
  double cell_ = 1.0;
  std::vector<double> alt_;
  Vec target_;
  double scale_ = 1.0;
  double offset_ = 0.0;
};

/// State of all agents at one time step.
struct JointState {
  std::vector<Vec> pos;
  int size() const { return int(pos.size()); }
};

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

/// Multi-agent MDP with factorized, synchronous transitions: each agent's
/// next state is its displaced position plus independent per-axis Gaussian
/// noise, folded back into the domain by the boundary rule.
struct EnvModel {
  int dim = 2;
  Box bounds;
  std::vector<Vec> actions;  // displacement per action, meters
  double noise_var = 0.0;    // per-axis transition noise variance
  Boundary boundary = Boundary::wrap;
  JointUnsafeSpec unsafe_joint;
  RewardField reward_field;
  double obs_noise_std = 0.1;  // eta

  void validate() const;

  int n_actions() const { return int(actions.size()); }

  Vec apply_boundary(const Vec& p) const;

  /// Deterministic displaced target before noise, boundary rule applied.
  Vec nominal_next(const Vec& state, int action_index) const;

  /// Folds a pre-drawn noise vector onto a nominal target. Lets callers share
  /// one noise stream across actions (common random numbers).
  Vec apply_noise(const Vec& nominal, const Vec& noise) const;

  Vec draw_noise(Rng& rng) const;

  Vec sample_next(const Vec& state, int action_index, Rng& rng) const;

  /// Synchronous step for all agents. Returns the next joint state and each
  /// agent's noisy reward observation at its own next state.
  std::pair<JointState, std::vector<double>> step(
      const JointState& joint, std::span<const int> action_indices,
      Rng& rng) const;

  bool is_jointly_unsafe(const JointState& joint) const;

  /// Transition density f(next | cur, action): product of per-axis Gaussians
  /// centered at nominal_next. For wrap boundaries the nearest periodic image
  /// is summed in per axis. For clamp boundaries this is the pre-clamp
  /// density (face atoms are not represented; safety integrals sample
  /// instead of evaluating densities at faces).
  double transition_density(const Vec& next, const Vec& cur,
                            int action_index) const;
};

/// Reads a terrain grid: line 1 `nx ny cell_size`, then ny lines of nx
/// altitudes (row-major, y ascending). Units meters, UTF-8 text.
RewardField load_terrain(const std::string& path);
RewardField load_terrain_stream(std::istream& in);
void write_terrain(const std::string& path, const RewardField& field);

/// Sum of seeded 2-D Gaussian bumps sampled onto a grid field.
RewardField synthetic_terrain(std::uint64_t seed, double size_m,
                              double cell_size, int bumps = 6);

}  // namespace masq
