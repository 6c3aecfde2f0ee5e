#include "masq/safety_core.hpp"

#include <algorithm>
#include <cmath>

namespace masq {

Lattice::Lattice(const Box& box, double spacing) : box_(box), rho_(spacing) {
  box_.validate();
  if (!(spacing > 0.0)) throw std::invalid_argument("lattice: bad spacing");
  dim_ = box_.dim();
  total_ = 1;
  for (int i = 0; i < dim_; ++i) {
    n_[size_t(i)] = std::max(1, int(std::ceil(box_.extent(i) / rho_ - 1e-9)));
    total_ *= n_[size_t(i)];
  }
}

int Lattice::cell_of(const Vec& p) const {
  int idx = 0;
  for (int i = dim_ - 1; i >= 0; --i) {
    int k = int(std::floor((p[i] - box_.lo[i]) / rho_));
    k = std::clamp(k, 0, n_[size_t(i)] - 1);
    idx = idx * n_[size_t(i)] + k;
  }
  return idx;
}

Vec Lattice::center(int idx) const {
  Vec p = Vec::zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    const int k = idx % n_[size_t(i)];
    idx /= n_[size_t(i)];
    p[i] = std::min(box_.lo[i] + (k + 0.5) * rho_, box_.hi[i]);
  }
  return p;
}

int SafeReturnSet::count() const {
  int c = 0;
  for (char m : member) c += (m != 0);
  return c;
}

namespace {

std::vector<Vec> draw_noise_set(const EnvModel& env, int m, Rng& rng) {
  std::vector<Vec> noise;
  noise.reserve(size_t(m));
  for (int i = 0; i < m; ++i) noise.push_back(env.draw_noise(rng));
  return noise;
}

}  // namespace

double reward_lcb_with_noise(const Vec& state, int action_index,
                             const GPosterior& gp, const BetaSchedule& schedule,
                             std::int64_t t, const EnvModel& env,
                             std::span<const Vec> noise) {
  const Vec nominal = env.nominal_next(state, action_index);
  std::vector<Vec> pts;
  pts.reserve(noise.size());
  for (const Vec& e : noise) pts.push_back(env.apply_noise(nominal, e));
  Eigen::VectorXd mean, sigma;
  gp.query_batch(pts, mean, sigma);
  const double beta = schedule(std::max<std::int64_t>(t, 1));
  return (mean - beta * sigma).mean();
}

double reward_lcb(const Vec& state, int action_index, const GPosterior& gp,
                  const BetaSchedule& schedule, std::int64_t t,
                  const EnvModel& env, const SafetyConfig& cfg, Rng& rng) {
  const auto noise = draw_noise_set(env, cfg.mc_samples, rng);
  return reward_lcb_with_noise(state, action_index, gp, schedule, t, env, noise);
}

double returnability_with_noise(const Vec& state, int action_index,
                                const SafeReturnSet& sset, const EnvModel& env,
                                std::span<const Vec> noise) {
  const Vec nominal = env.nominal_next(state, action_index);
  int in = 0;
  for (const Vec& e : noise)
    in += sset.contains(env.apply_noise(nominal, e)) ? 1 : 0;
  return double(in) / double(noise.size());
}

double returnability(const Vec& state, int action_index,
                     const SafeReturnSet& sset, const EnvModel& env,
                     const SafetyConfig& cfg, Rng& rng) {
  const auto noise = draw_noise_set(env, cfg.mc_samples, rng);
  return returnability_with_noise(state, action_index, sset, env, noise);
}

SafeReturnSet compute_safe_return_set(const GPosterior& gp,
                                      const BetaSchedule& schedule,
                                      const EnvModel& env,
                                      const RegionPred& s0,
                                      const SafetyConfig& cfg, std::int64_t t,
                                      Rng& rng) {
  cfg.validate();
  SafeReturnSet sset;
  sset.lattice = Lattice(env.bounds, cfg.lattice_spacing);
  sset.t = t;
  const int n_cells = sset.lattice.size();
  sset.member.assign(size_t(n_cells), 0);
  for (int c = 0; c < n_cells; ++c)
    if (s0(sset.lattice.center(c))) sset.member[size_t(c)] = 1;

  // Discretized reward bound: r_lo at every cell center, one batched query.
  std::vector<Vec> centers;
  centers.reserve(size_t(n_cells));
  for (int c = 0; c < n_cells; ++c) centers.push_back(sset.lattice.center(c));
  Eigen::VectorXd mean, sigma;
  gp.query_batch(centers, mean, sigma);
  const double beta = schedule(std::max<std::int64_t>(t, 1));
  const Eigen::VectorXd cell_r_lo = mean - beta * sigma;

  const auto noise = draw_noise_set(env, cfg.mc_samples, rng);
  const int n_actions = env.n_actions();
  const int m = cfg.mc_samples;

  // Landing cells and sample-averaged reward bound per (cell, action); the
  // expansion loop then only tests membership.
  std::vector<int> landing(size_t(n_cells) * size_t(n_actions) * size_t(m));
  std::vector<double> lr_disc(size_t(n_cells) * size_t(n_actions));
  for (int c = 0; c < n_cells; ++c) {
    for (int a = 0; a < n_actions; ++a) {
      const Vec nominal = env.nominal_next(centers[size_t(c)], a);
      double lr_sum = 0.0;
      for (int k = 0; k < m; ++k) {
        const int cell =
            sset.lattice.cell_of(env.apply_noise(nominal, noise[size_t(k)]));
        landing[(size_t(c) * size_t(n_actions) + size_t(a)) * size_t(m) + size_t(k)] =
            cell;
        lr_sum += cell_r_lo(cell);
      }
      lr_disc[size_t(c) * size_t(n_actions) + size_t(a)] = lr_sum / double(m);
    }
  }

  for (int iter = 0; iter < cfg.fixed_point_cap; ++iter) {
    std::vector<int> added;
    for (int c = 0; c < n_cells; ++c) {
      if (sset.member[size_t(c)]) continue;
      bool ok = false;
      for (int a = 0; a < n_actions && !ok; ++a) {
        if (lr_disc[size_t(c) * size_t(n_actions) + size_t(a)] < cfg.h) continue;
        int in = 0;
        const size_t base =
            (size_t(c) * size_t(n_actions) + size_t(a)) * size_t(m);
        for (int k = 0; k < m; ++k)
          in += sset.member[size_t(landing[base + size_t(k)])] ? 1 : 0;
        ok = return_passes(double(in) / double(m), cfg.tau);
      }
      if (ok) added.push_back(c);
    }
    if (added.empty()) break;
    for (int c : added) sset.member[size_t(c)] = 1;
  }
  return sset;
}

std::vector<OpponentLaw> upper_bound_laws(const JointState& joint,
                                          int own_index,
                                          std::span<const OpponentModel> models) {
  std::vector<OpponentLaw> laws;
  laws.reserve(models.size());
  int mi = 0;
  for (int i = 0; i < joint.size(); ++i) {
    if (i == own_index) continue;
    const auto [w, mass] =
        models[size_t(mi)].action_weights_upper(joint.pos[size_t(i)]);
    laws.push_back({joint.pos[size_t(i)], w, mass});
    ++mi;
  }
  return laws;
}

double joint_safety_lcb_with_outcomes(const JointState& joint, int own_index,
                                      std::span<const Vec> own_outcomes,
                                      std::span<const OpponentLaw> laws,
                                      const EnvModel& env, int inner_samples,
                                      Rng& rng) {
  if (laws.empty()) return 1.0;
  double mass = 1.0;
  for (const OpponentLaw& law : laws) mass *= law.mass;

  JointState tuple = joint;
  double safe_sum = 0.0;
  for (const Vec& own : own_outcomes) {
    tuple.pos[size_t(own_index)] = own;
    int hits = 0;
    for (int k = 0; k < inner_samples; ++k) {
      size_t oi = 0;
      for (int i = 0; i < joint.size(); ++i) {
        if (i == own_index) continue;
        const OpponentLaw& law = laws[oi];
        std::span<const double> w(law.weights.data(),
                                  size_t(law.weights.size()));
        const int a = rng.categorical(w, law.mass);
        tuple.pos[size_t(i)] = env.sample_next(law.state, a, rng);
        ++oi;
      }
      hits += env.is_jointly_unsafe(tuple) ? 1 : 0;
    }
    // Weight mass scales the unsafe probability into an upper bound.
    const double p_unsafe =
        std::min(1.0, mass * double(hits) / double(inner_samples));
    safe_sum += 1.0 - p_unsafe;
  }
  return std::clamp(safe_sum / double(own_outcomes.size()), 0.0, 1.0);
}

double joint_safety_lcb(const JointState& joint, int own_index,
                        int own_action_index,
                        std::span<const OpponentLaw> laws, const EnvModel& env,
                        const SafetyConfig& cfg, Rng& rng) {
  if (laws.empty()) return 1.0;
  const Vec own_state = joint.pos[size_t(own_index)];
  const Vec nominal = env.nominal_next(own_state, own_action_index);
  std::vector<Vec> own_outcomes;
  own_outcomes.reserve(size_t(cfg.mc_samples));
  for (int k = 0; k < cfg.mc_samples; ++k)
    own_outcomes.push_back(env.apply_noise(nominal, env.draw_noise(rng)));
  return joint_safety_lcb_with_outcomes(joint, own_index, own_outcomes, laws,
                                        env, cfg.mc_samples, rng);
}

int ActionAssessment::argmax_joint_safe(double grain) const {
  const auto bin = [grain](double lc) {
    return std::llround(lc / grain);
  };
  int best = 0;
  for (int a = 1; a < int(joint_safe_lcb.size()); ++a) {
    const auto ba = bin(joint_safe_lcb(a)), bb = bin(joint_safe_lcb(best));
    if (ba > bb || (ba == bb && lower_reward(a) > lower_reward(best)))
      best = a;
  }
  return best;
}

bool ActionAssessment::consistent_with(const SafetyConfig& cfg) const {
  for (int a = 0; a < int(lower_reward.size()); ++a) {
    const bool hr =
        lower_reward(a) >= cfg.h && return_passes(return_prob(a), cfg.tau);
    const bool js = joint_safe_lcb(a) >= cfg.c;
    if (hr != (hi_rew[size_t(a)] != 0)) return false;
    if (js != (joint_safe[size_t(a)] != 0)) return false;
    if ((hr && js) != (safe[size_t(a)] != 0)) return false;
  }
  return true;
}

ActionAssessment assess_actions(const JointState& joint, int own_index,
                                const GPosterior& gp,
                                const BetaSchedule& schedule,
                                const SafeReturnSet& sset,
                                std::span<const OpponentLaw> laws,
                                const EnvModel& env, const SafetyConfig& cfg,
                                std::int64_t t, Rng& rng) {
  cfg.validate();
  const int n_actions = env.n_actions();
  const int m = cfg.mc_samples;
  const Vec own_state = joint.pos[size_t(own_index)];

  ActionAssessment out;
  out.lower_reward.resize(n_actions);
  out.return_prob.resize(n_actions);
  out.joint_safe_lcb.resize(n_actions);
  out.mean_sigma.resize(n_actions);
  out.hi_rew.assign(size_t(n_actions), 0);
  out.joint_safe.assign(size_t(n_actions), 0);
  out.safe.assign(size_t(n_actions), 0);

  // One noise stream shared across all actions; the inner opponent stream is
  // re-derived with a fixed key per action so every action sees the same
  // inner sample sequence (common random numbers).
  const auto noise = draw_noise_set(env, m, rng);
  const Rng inner_base = rng.split(0x1ccull);

  // All sampled next states in one GP batch: action-major layout.
  std::vector<Vec> pts;
  pts.reserve(size_t(n_actions) * size_t(m));
  for (int a = 0; a < n_actions; ++a) {
    const Vec nominal = env.nominal_next(own_state, a);
    for (int k = 0; k < m; ++k)
      pts.push_back(env.apply_noise(nominal, noise[size_t(k)]));
  }
  Eigen::VectorXd mean, sigma;
  gp.query_batch(pts, mean, sigma);
  const double beta = schedule(std::max<std::int64_t>(t, 1));

  for (int a = 0; a < n_actions; ++a) {
    double lr_sum = 0.0, sd_sum = 0.0;
    int in = 0;
    for (int k = 0; k < m; ++k) {
      const int idx = a * m + k;
      lr_sum += mean(idx) - beta * sigma(idx);
      sd_sum += sigma(idx);
      in += sset.contains(pts[size_t(idx)]) ? 1 : 0;
    }
    out.lower_reward(a) = lr_sum / double(m);
    out.mean_sigma(a) = sd_sum / double(m);
    out.return_prob(a) = double(in) / double(m);
    std::span<const Vec> own_outcomes(&pts[size_t(a) * size_t(m)], size_t(m));
    Rng inner = inner_base;
    out.joint_safe_lcb(a) = joint_safety_lcb_with_outcomes(
        joint, own_index, own_outcomes, laws, env, m, inner);

    const bool hr = out.lower_reward(a) >= cfg.h &&
                    return_passes(out.return_prob(a), cfg.tau);
    const bool js = out.joint_safe_lcb(a) >= cfg.c;
    out.hi_rew[size_t(a)] = hr;
    out.joint_safe[size_t(a)] = js;
    out.safe[size_t(a)] = hr && js;
    out.n_safe += (hr && js) ? 1 : 0;
  }
  return out;
}

}  // namespace masq
