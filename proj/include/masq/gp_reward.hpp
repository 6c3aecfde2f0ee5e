#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "masq/geometry.hpp"

namespace masq {

/// RBF kernel with additive white observation noise.
struct KernelSpec {
  double length_scale = 1.0;
  double signal_std = 1.0;
  double white_noise_std = 0.1;

  void validate() const {
    if (!(length_scale > 0.0) || !(signal_std > 0.0) || !(white_noise_std > 0.0))
      throw std::invalid_argument("kernel parameters must be positive");
  }

  double operator()(const Vec& a, const Vec& b) const {
    return signal_std * signal_std *
           std::exp(-a.squared_distance(b) / (2.0 * length_scale * length_scale));
  }
};

/// Multiplier on the posterior standard deviation defining the reward
/// confidence interval. The theoretical mode evaluates
/// beta(t) = 2B + 300 * alpha_t * log^3(t / delta) with a user-supplied
/// information-capacity sequence alpha_t.
class BetaSchedule {
 public:
  using AlphaFn = std::function<double(std::int64_t)>;

  static BetaSchedule constant(double beta) {
    BetaSchedule s;
    s.beta_ = beta;
    return s;
  }

  static BetaSchedule theoretical(double rkhs_bound, double delta, AlphaFn alpha) {
    BetaSchedule s;
    s.theoretical_ = true;
    s.rkhs_bound_ = rkhs_bound;
    s.delta_ = delta;
    s.alpha_ = std::move(alpha);
    return s;
  }

  double operator()(std::int64_t t) const;

 private:
  bool theoretical_ = false;
  double beta_ = 2.0;
  double rkhs_bound_ = 0.0;
  double delta_ = 1.0;
  AlphaFn alpha_;
};

struct GpQuery {
  double mean, sigma, upper, lower;
};

/// Exact GP regression over the state domain with zero prior mean and
/// incremental Cholesky updates. Reported sigma is the latent-function
/// standard deviation (signal component only); white noise enters only the
/// Gram matrix.
///
/// Beyond merge_cap stored points, a new observation within
/// 0.25 * length_scale of an existing point is folded into it by running
/// average instead of growing the factorization.
class GPosterior {
 public:
  explicit GPosterior(KernelSpec kernel, int merge_cap = 1000);

  void add(const Vec& point, double observation);

  /// (posterior mean, latent standard deviation) at one point.
  std::pair<double, double> query(const Vec& point) const;

  /// Batched (mean, sigma) over many points; one triangular solve.
  void query_batch(std::span<const Vec> points, Eigen::VectorXd& mean,
                   Eigen::VectorXd& sigma) const;

  GpQuery query_bounds(const Vec& point, const BetaSchedule& schedule,
                       std::int64_t t) const;

  int stored_points() const { return int(points_.size()); }
  std::int64_t observation_count() const { return observations_; }
  const KernelSpec& kernel() const { return kernel_; }
  const std::vector<Vec>& points() const { return points_; }

 private:
  void rebuild_alpha();

  KernelSpec kernel_;
  int merge_cap_;
  double jitter_;
  std::vector<Vec> points_;
  Eigen::MatrixXd coords_;       // stored points, row-major (n x dim)
  Eigen::VectorXd coord_sqn_;    // row squared norms
  std::vector<int> merge_counts_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd chol_;  // lower factor of K + (noise + jitter) I
  Eigen::VectorXd alpha_;
  std::int64_t observations_ = 0;
};

}  // namespace masq
