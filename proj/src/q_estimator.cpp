#include "masq/q_estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "masq/rng.hpp"

namespace masq {

Approximator::Approximator(int input_dim, int n_actions, std::uint64_t seed,
                           const Box* input_box) {
  if (input_dim < 1 || n_actions < 1)
    throw std::invalid_argument("approximator: bad dimensions");
  Rng rng(mix_seed({seed, 0x9a7full}));
  auto fill = [&rng](Eigen::MatrixXd& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        m(i, j) = rng.uniform(-bound, bound);
  };
  w1_.resize(kHidden, input_dim);
  w2_.resize(kHidden, kHidden);
  w3_.resize(n_actions, kHidden);
  fill(w1_, input_dim);
  fill(w2_, kHidden);
  w3_.setZero();
  b1_ = Eigen::VectorXd::Zero(kHidden);
  b2_ = Eigen::VectorXd::Zero(kHidden);
  b3_ = Eigen::VectorXd::Zero(n_actions);

  in_scale_ = Eigen::VectorXd::Ones(input_dim);
  in_offset_ = Eigen::VectorXd::Zero(input_dim);
  if (input_box != nullptr) {
    const int d = input_box->dim();
    for (int i = 0; i < input_dim; ++i) {
      const int axis = i % d;
      in_offset_(i) = 0.5 * (input_box->lo[axis] + input_box->hi[axis]);
      in_scale_(i) = 2.0 / input_box->extent(axis);
    }
  }
}

Eigen::VectorXd Approximator::forward(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd h1 = (w1_ * normalize(x) + b1_).array().tanh();
  const Eigen::VectorXd h2 = (w2_ * h1 + b2_).array().tanh();
  return w3_ * h2 + b3_;
}

int Approximator::param_count() const {
  return int(w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() +
             b3_.size());
}

Eigen::VectorXd Approximator::params() const {
  Eigen::VectorXd p(param_count());
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    p.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  };
  put(w1_); put(b1_); put(w2_); put(b2_); put(w3_); put(b3_);
  return p;
}

void Approximator::set_params(const Eigen::VectorXd& p) {
  if (p.size() != param_count())
    throw std::invalid_argument("set_params: size mismatch");
  Eigen::Index at = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = p.segment(at, m.size());
    at += m.size();
  };
  take(w1_); take(b1_); take(w2_); take(b2_); take(w3_); take(b3_);
}

double Approximator::loss_and_grad(const Eigen::MatrixXd& xs,
                                   std::span<const int> actions,
                                   const Eigen::VectorXd& targets,
                                   Eigen::VectorXd* grad) const {
  const int batch = int(xs.cols());
  if (batch == 0) throw std::invalid_argument("loss_and_grad: empty batch");

  Eigen::MatrixXd gw1, gw2, gw3;
  Eigen::VectorXd gb1, gb2, gb3;
  if (grad != nullptr) {
    gw1 = Eigen::MatrixXd::Zero(w1_.rows(), w1_.cols());
    gw2 = Eigen::MatrixXd::Zero(w2_.rows(), w2_.cols());
    gw3 = Eigen::MatrixXd::Zero(w3_.rows(), w3_.cols());
    gb1 = Eigen::VectorXd::Zero(b1_.size());
    gb2 = Eigen::VectorXd::Zero(b2_.size());
    gb3 = Eigen::VectorXd::Zero(b3_.size());
  }

  double loss = 0.0;
  for (int i = 0; i < batch; ++i) {
    const Eigen::VectorXd xn = normalize(xs.col(i));
    const Eigen::VectorXd h1 = (w1_ * xn + b1_).array().tanh();
    const Eigen::VectorXd h2 = (w2_ * h1 + b2_).array().tanh();
    const int a = actions[size_t(i)];
    const double q = w3_.row(a).dot(h2) + b3_(a);
    const double resid = q - targets(i);
    loss += resid * resid;
    if (grad == nullptr) continue;

    const double dq = 2.0 * resid / double(batch);
    gw3.row(a) += dq * h2.transpose();
    gb3(a) += dq;
    Eigen::VectorXd d2 =
        (dq * w3_.row(a).transpose()).cwiseProduct((1.0 - h2.array().square()).matrix());
    gw2 += d2 * h1.transpose();
    gb2 += d2;
    Eigen::VectorXd d1 =
        (w2_.transpose() * d2).cwiseProduct((1.0 - h1.array().square()).matrix());
    gw1 += d1 * xn.transpose();
    gb1 += d1;
  }
  loss /= double(batch);

  if (grad != nullptr) {
    grad->resize(param_count());
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
      grad->segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
      at += m.size();
    };
    put(gw1); put(gb1); put(gw2); put(gb2); put(gw3); put(gb3);
  }
  return loss;
}

QTriple::QTriple(int input_dim, int n_actions, std::uint64_t seed,
                 const Box* box, TdConfig cfg)
    : cfg_(cfg) {
  cfg_.validate();
  for (int h = 0; h < 3; ++h)
    live_.emplace_back(input_dim, n_actions, mix_seed({seed, std::uint64_t(h)}),
                       box);
  target_ = live_;
}

std::array<double, 3> QTriple::q_eval(const Eigen::VectorXd& s, int a) const {
  if (a < 0 || a >= n_actions()) throw std::out_of_range("q_eval: bad action");
  return {live_[kHeadMu].forward(s)(a), live_[kHeadUp].forward(s)(a),
          live_[kHeadLo].forward(s)(a)};
}

double QTriple::td_loss(int head, std::span<const Transition> batch,
                        const BoundsFn& bounds, Eigen::VectorXd* grad) const {
  const int n = int(batch.size());
  if (n == 0) throw std::invalid_argument("td_update: empty batch");
  Eigen::MatrixXd xs(live_[0].input_dim(), n);
  Eigen::VectorXd targets(n);
  std::vector<int> acts(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Transition& tr = batch[size_t(i)];
    xs.col(i) = tr.s;
    acts[size_t(i)] = tr.a;
    targets(i) = bounds(tr)[size_t(head)] +
                 cfg_.gamma * target_[size_t(head)].max_q(tr.s_next);
  }
  return live_[size_t(head)].loss_and_grad(xs, acts, targets, grad);
}

void QTriple::td_update(std::span<const Transition> batch,
                        const BoundsFn& bounds) {
  for (int h = 0; h < 3; ++h) {
    Eigen::VectorXd grad;
    const double loss = td_loss(h, batch, bounds, &grad);
    if (!std::isfinite(loss))
      throw std::runtime_error("td_update: non-finite loss (divergence)");
    const double norm = grad.norm();
    if (norm > cfg_.grad_clip) grad *= cfg_.grad_clip / norm;
    live_[size_t(h)].set_params(live_[size_t(h)].params() -
                                cfg_.step_size * grad);
  }
  if (++steps_since_sync_ >= cfg_.target_sync_period) sync_targets();
}

void QTriple::sync_targets() {
  target_ = live_;
  steps_since_sync_ = 0;
}

void FiniteMdp::validate() const {
  if (n_states < 1 || n_actions < 1)
    throw std::invalid_argument("finite mdp: empty state or action set");
  if (int(transitions.size()) != n_actions)
    throw std::invalid_argument("finite mdp: one matrix per action required");
  for (const auto& P : transitions) {
    if (P.rows() != n_states || P.cols() != n_states)
      throw std::invalid_argument("finite mdp: transition shape mismatch");
    for (int s = 0; s < n_states; ++s)
      if (std::abs(P.row(s).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("finite mdp: rows must sum to 1");
  }
}

namespace {

Eigen::MatrixXd value_iterate(const FiniteMdp& mdp, const Eigen::VectorXd& r,
                              double gamma, double tol, int max_sweeps) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Eigen::VectorXd v = q.rowwise().maxCoeff();
    Eigen::MatrixXd next(mdp.n_states, mdp.n_actions);
    for (int a = 0; a < mdp.n_actions; ++a)
      next.col(a) = mdp.transitions[size_t(a)] * (r + gamma * v);
    const double delta = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (delta < tol) return q;
  }
  throw std::runtime_error("solve_tabular: no convergence within sweep cap");
}

}  // namespace

TabularQ solve_tabular(const FiniteMdp& mdp, const RewardTriple& rewards,
                       double gamma, double tol, int max_sweeps) {
  mdp.validate();
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("solve_tabular: gamma must lie in (0,1)");
  TabularQ out;
  out.gamma = gamma;
  out.q_mu = value_iterate(mdp, rewards.r_mu, gamma, tol, max_sweeps);
  out.q_up = value_iterate(mdp, rewards.r_up, gamma, tol, max_sweeps);
  out.q_lo = value_iterate(mdp, rewards.r_lo, gamma, tol, max_sweeps);
  return out;
}

}  // namespace masq
