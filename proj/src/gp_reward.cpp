#include "masq/gp_reward.hpp"

#include <cmath>
#include <stdexcept>

namespace masq {

double BetaSchedule::operator()(std::int64_t t) const {
  if (!theoretical_) return beta_;
  if (t < 1) throw std::invalid_argument("beta: t must be >= 1");
  const double ratio = double(t) / delta_;
  if (ratio <= 1.0)
    throw std::invalid_argument("beta: t/delta <= 1 makes log^3 negative");
  const double lg = std::log(ratio);
  return 2.0 * rkhs_bound_ + 300.0 * alpha_(t) * lg * lg * lg;
}

GPosterior::GPosterior(KernelSpec kernel, int merge_cap)
    : kernel_(kernel), merge_cap_(merge_cap) {
  kernel_.validate();
  jitter_ = 1e-8 * kernel_.signal_std * kernel_.signal_std;
}

void GPosterior::rebuild_alpha() {
  const int n = stored_points();
  alpha_ = y_;
  chol_.topLeftCorner(n, n)
      .triangularView<Eigen::Lower>()
      .solveInPlace(alpha_);
  chol_.topLeftCorner(n, n)
      .triangularView<Eigen::Lower>()
      .transpose()
      .solveInPlace(alpha_);
}

void GPosterior::add(const Vec& point, double observation) {
  ++observations_;
  const int n = stored_points();

  if (n >= merge_cap_) {
    const double radius = 0.25 * kernel_.length_scale;
    int nearest = -1;
    double best = radius * radius;
    for (int i = 0; i < n; ++i) {
      const double d2 = points_[size_t(i)].squared_distance(point);
      if (d2 <= best) {
        best = d2;
        nearest = i;
      }
    }
    if (nearest >= 0) {
      // Equal observation noise per sample, so inverse-variance averaging is
      // a running mean; the Gram matrix is unchanged.
      int& count = merge_counts_[size_t(nearest)];
      ++count;
      y_(nearest) += (observation - y_(nearest)) / double(count);
      rebuild_alpha();
      return;
    }
  }

  Eigen::VectorXd k_vec(n);
  for (int i = 0; i < n; ++i) k_vec(i) = kernel_(points_[size_t(i)], point);
  const double noise = kernel_.white_noise_std * kernel_.white_noise_std;
  const double c = kernel_(point, point) + noise + jitter_;

  chol_.conservativeResize(n + 1, n + 1);
  double d2;
  if (n == 0) {
    d2 = c;
  } else {
    Eigen::VectorXd l = k_vec;
    chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(l);
    d2 = c - l.squaredNorm();
    if (d2 <= 0.0) d2 = c + 100.0 * jitter_ - l.squaredNorm();
    if (d2 <= 0.0)
      throw std::runtime_error(
          "gp_update: Gram matrix lost positive-definiteness");
    chol_.row(n).head(n) = l.transpose();
  }
  chol_.col(n).head(n).setZero();
  chol_(n, n) = std::sqrt(d2);

  points_.push_back(point);
  coords_.conservativeResize(n + 1, point.dim);
  for (int d = 0; d < point.dim; ++d) coords_(n, d) = point[d];
  coord_sqn_.conservativeResize(n + 1);
  coord_sqn_(n) = coords_.row(n).squaredNorm();
  merge_counts_.push_back(1);
  y_.conservativeResize(n + 1);
  y_(n) = observation;
  rebuild_alpha();
}

std::pair<double, double> GPosterior::query(const Vec& point) const {
  const int n = stored_points();
  if (n == 0) return {0.0, kernel_.signal_std};
  Eigen::VectorXd k_vec(n);
  for (int i = 0; i < n; ++i) k_vec(i) = kernel_(points_[size_t(i)], point);
  const double mean = k_vec.dot(alpha_);
  chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(k_vec);
  const double var =
      kernel_.signal_std * kernel_.signal_std - k_vec.squaredNorm();
  return {mean, std::sqrt(std::max(var, 0.0))};
}

void GPosterior::query_batch(std::span<const Vec> pts, Eigen::VectorXd& mean,
                             Eigen::VectorXd& sigma) const {
  const int n = stored_points();
  const int m = int(pts.size());
  mean.resize(m);
  sigma.resize(m);
  if (n == 0) {
    mean.setZero();
    sigma.setConstant(kernel_.signal_std);
    return;
  }
  const int dim = points_.front().dim;
  Eigen::MatrixXd P(m, dim);
  for (int j = 0; j < m; ++j)
    for (int d = 0; d < dim; ++d) P(j, d) = pts[size_t(j)][d];

  // K via one GEMM on squared distances; exp vectorizes over the array.
  Eigen::MatrixXd K = -2.0 * (coords_ * P.transpose());
  K.colwise() += coord_sqn_;
  K.rowwise() += P.rowwise().squaredNorm().transpose();
  const double s2 = kernel_.signal_std * kernel_.signal_std;
  K = s2 * (K * (-0.5 / (kernel_.length_scale * kernel_.length_scale)))
              .array()
              .exp()
              .matrix();

  mean = K.transpose() * alpha_;
  chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(K);
  for (int j = 0; j < m; ++j)
    sigma(j) = std::sqrt(std::max(s2 - K.col(j).squaredNorm(), 0.0));
}

GpQuery GPosterior::query_bounds(const Vec& point, const BetaSchedule& schedule,
                                 std::int64_t t) const {
  const auto [mean, sd] = query(point);
  const double beta = schedule(t);
  return {mean, sd, mean + beta * sd, mean - beta * sd};
}

}  // namespace masq
