#include "masq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

namespace masq {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::horizon: return "horizon";
    case TerminationCause::individual_unsafe: return "individual_unsafe";
    case TerminationCause::joint_unsafe: return "joint_unsafe";
  }
  return "unknown";
}

bool EpisodeLog::operator==(const EpisodeLog& other) const {
  if (n_agents != other.n_agents || dim != other.dim ||
      length != other.length || cause != other.cause ||
      rows.size() != other.rows.size())
    return false;
  for (size_t i = 0; i < rows.size(); ++i) {
    const StepRecord& a = rows[i];
    const StepRecord& b = other.rows[i];
    if (a.t != b.t || a.agent_id != b.agent_id || !(a.pos == b.pos) ||
        a.action != b.action || a.reward_obs != b.reward_obs ||
        a.has_cert != b.has_cert || a.indiv_unsafe != b.indiv_unsafe ||
        a.joint_unsafe != b.joint_unsafe)
      return false;
    if (a.has_cert && (a.lr_sel != b.lr_sel || a.return_sel != b.return_sel ||
                       a.lc_sel != b.lc_sel))
      return false;
  }
  return true;
}

void write_episode_csv(const std::string& path, const EpisodeLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write episode csv: " + path);
  out << "# cause=" << to_string(log.cause) << " agents=" << log.n_agents
      << " dim=" << log.dim << " length=" << log.length << "\n";
  out << "t,agent_id,x";
  if (log.dim >= 2) out << ",y";
  if (log.dim >= 3) out << ",z";
  out << ",action,reward_obs,lr_sel,return_sel,lc_sel,indiv_unsafe,joint_unsafe\n";
  for (const StepRecord& r : log.rows) {
    out << r.t << ',' << r.agent_id;
    for (int d = 0; d < log.dim; ++d) out << ',' << fmt_double(r.pos[d]);
    out << ',' << r.action << ',' << fmt_double(r.reward_obs) << ',';
    if (r.has_cert)
      out << fmt_double(r.lr_sel) << ',' << fmt_double(r.return_sel) << ','
          << fmt_double(r.lc_sel);
    else
      out << ",,";
    out << ',' << (r.indiv_unsafe ? 1 : 0) << ',' << (r.joint_unsafe ? 1 : 0)
        << "\n";
  }
}

EpisodeLog parse_episode_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open episode csv: " + path);
  EpisodeLog log;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# cause=", 0) != 0)
    throw std::runtime_error("episode csv: missing metadata line");
  {
    std::istringstream meta(line.substr(2));
    std::string tok;
    while (meta >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "cause") {
        if (val == "horizon") log.cause = TerminationCause::horizon;
        else if (val == "individual_unsafe") log.cause = TerminationCause::individual_unsafe;
        else if (val == "joint_unsafe") log.cause = TerminationCause::joint_unsafe;
        else throw std::runtime_error("episode csv: bad cause " + val);
      } else if (key == "agents") {
        log.n_agents = std::stoi(val);
      } else if (key == "dim") {
        log.dim = std::stoi(val);
      } else if (key == "length") {
        log.length = std::stoi(val);
      }
    }
  }
  if (!std::getline(in, line))
    throw std::runtime_error("episode csv: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
    const size_t expect = size_t(7 + log.dim + 2);
    if (fields.size() != expect)
      throw std::runtime_error("episode csv: bad field count");
    StepRecord r;
    size_t f = 0;
    r.t = std::stoi(fields[f++]);
    r.agent_id = std::stoi(fields[f++]);
    r.pos = Vec::zero(log.dim);
    for (int d = 0; d < log.dim; ++d) r.pos[d] = std::stod(fields[f++]);
    r.action = std::stoi(fields[f++]);
    r.reward_obs = std::stod(fields[f++]);
    const std::string& lr = fields[f++];
    const std::string& ret = fields[f++];
    const std::string& lc = fields[f++];
    r.has_cert = !lr.empty();
    if (r.has_cert) {
      r.lr_sel = std::stod(lr);
      r.return_sel = std::stod(ret);
      r.lc_sel = std::stod(lc);
    }
    r.indiv_unsafe = fields[f++] == "1";
    r.joint_unsafe = fields[f++] == "1";
    log.rows.push_back(r);
  }
  return log;
}

int new_states_visited(const EpisodeLog& log, int agent_id,
                       const Lattice& lattice,
                       std::unordered_set<int>& history) {
  int fresh = 0;
  for (const StepRecord& r : log.rows) {
    if (r.agent_id != agent_id) continue;
    if (history.insert(lattice.cell_of(r.pos)).second) ++fresh;
  }
  return fresh;
}

void ExperimentConfig::validate() const {
  env.validate();
  safety.validate();
  if (roster.empty()) throw std::invalid_argument("experiment: empty roster");
  if (episodes < 1 || steps < 1)
    throw std::invalid_argument("experiment: episodes and steps must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("experiment: no seeds");
  if (instrumented < 0 || instrumented >= int(roster.size()))
    throw std::invalid_argument("experiment: bad instrumented index");
  if (!random_init && int(fixed_init.size()) != int(roster.size()))
    throw std::invalid_argument("experiment: fixed_init size mismatch");
}

double MetricsSummary::mean_over_episodes(
    const std::vector<std::vector<double>>& series, int agent,
    int from_episode) const {
  const auto& row = series[size_t(agent)];
  double sum = 0.0;
  int n = 0;
  for (int e = from_episode; e < int(row.size()); ++e) {
    sum += row[size_t(e)];
    ++n;
  }
  return n ? sum / n : 0.0;
}

void MetricsSummary::finalize() {
  const int n_agents = int(raw.size());
  const int n_seeds = int(seeds.size());
  auto derive = [&](auto pick, std::vector<std::vector<double>>& mean_out,
                    std::vector<std::vector<double>>& se_out) {
    mean_out.assign(size_t(n_agents), std::vector<double>(size_t(episodes), 0.0));
    se_out.assign(size_t(n_agents), std::vector<double>(size_t(episodes), 0.0));
    for (int a = 0; a < n_agents; ++a) {
      for (int e = 0; e < episodes; ++e) {
        double sum = 0.0;
        for (int s = 0; s < n_seeds; ++s) sum += pick(raw[size_t(a)][size_t(s)][size_t(e)]);
        const double mean = sum / n_seeds;
        double var = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
          const double d = pick(raw[size_t(a)][size_t(s)][size_t(e)]) - mean;
          var += d * d;
        }
        mean_out[size_t(a)][size_t(e)] = mean;
        se_out[size_t(a)][size_t(e)] =
            n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) / std::sqrt(double(n_seeds))
                        : 0.0;
      }
    }
  };
  derive([](const EpisodeMetrics& m) { return m.reward; }, reward_mean, reward_se);
  derive([](const EpisodeMetrics& m) { return double(m.unsafe_events); },
         unsafe_mean, unsafe_se);
  derive([](const EpisodeMetrics& m) { return double(m.safe_steps); },
         safe_steps_mean, safe_steps_se);
  derive([](const EpisodeMetrics& m) { return double(m.new_cells); },
         new_cells_mean, new_cells_se);
}

namespace {

bool pair_violates(const JointUnsafeSpec& spec, const Vec& a, const Vec& b) {
  const double d = a.distance(b);
  return spec.kind == JointUnsafeSpec::Kind::min_pairwise_distance
             ? d < spec.threshold
             : d > spec.threshold;
}

JointState sample_initial(const ExperimentConfig& cfg, const EnvModel& env,
                          Rng& rng) {
  if (!cfg.random_init) return JointState{cfg.fixed_init};
  const Box region = cfg.has_init_box ? cfg.init_box : env.bounds;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    JointState joint;
    for (size_t i = 0; i < cfg.roster.size(); ++i)
      joint.pos.push_back(env.bounds.clamp(region.sample(rng)));
    bool ok = !env.is_jointly_unsafe(joint);
    for (const Vec& p : joint.pos)
      ok = ok && env.reward_field(p) >= cfg.safety.h;
    if (ok) return joint;
  }
  throw std::runtime_error("no individually and jointly safe initial state "
                           "found in 10000 attempts");
}

}  // namespace

EpisodeLog run_episode(const ExperimentConfig& cfg, const EnvModel& env,
                       std::vector<std::unique_ptr<Agent>>& agents,
                       const JointState& initial, int episode_index,
                       Rng& env_rng) {
  const int n = int(agents.size());
  EpisodeLog log;
  log.n_agents = n;
  log.dim = env.dim;

  // Agents observe their own initial state's reward before acting.
  for (int i = 0; i < n; ++i) {
    const double obs = env.reward_field(initial.pos[size_t(i)]) +
                       env.obs_noise_std * env_rng.gaussian();
    agents[size_t(i)]->observe_reward(initial.pos[size_t(i)], obs);
  }

  JointState joint = initial;
  for (int step = 0; step < cfg.steps; ++step) {
    const std::int64_t t = std::int64_t(episode_index) * cfg.steps + step;
    std::vector<ActDecision> decisions;
    decisions.reserve(size_t(n));
    std::vector<int> actions(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      decisions.push_back(agents[size_t(i)]->act(joint, t));
      actions[size_t(i)] = decisions.back().action;
    }

    auto [next, rewards] = env.step(joint, actions, env_rng);

    const bool joint_unsafe = env.is_jointly_unsafe(next);
    std::vector<StepFlags> flags(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      flags[size_t(i)].indiv_unsafe =
          env.reward_field(next.pos[size_t(i)]) < cfg.safety.h;
      bool involved = false;
      for (int j = 0; j < n && !involved; ++j)
        involved = j != i && pair_violates(env.unsafe_joint, next.pos[size_t(i)],
                                           next.pos[size_t(j)]);
      flags[size_t(i)].joint_unsafe = involved;
    }

    for (int i = 0; i < n; ++i)
      agents[size_t(i)]->learn(joint, actions, next, rewards[size_t(i)],
                               flags[size_t(i)], t);

    for (int i = 0; i < n; ++i) {
      StepRecord r;
      r.t = step;
      r.agent_id = i;
      r.pos = next.pos[size_t(i)];
      r.action = actions[size_t(i)];
      r.reward_obs = rewards[size_t(i)];
      if (i == cfg.instrumented && decisions[size_t(i)].assessment) {
        const ActionAssessment& as = *decisions[size_t(i)].assessment;
        r.has_cert = true;
        r.lr_sel = as.lower_reward(r.action);
        r.return_sel = as.return_prob(r.action);
        r.lc_sel = as.joint_safe_lcb(r.action);
      }
      r.indiv_unsafe = flags[size_t(i)].indiv_unsafe;
      r.joint_unsafe = flags[size_t(i)].joint_unsafe;
      log.rows.push_back(std::move(r));
    }
    log.length = step + 1;

    bool any_indiv = false;
    for (const StepFlags& f : flags) any_indiv = any_indiv || f.indiv_unsafe;
    if (cfg.terminate_on_violation && (joint_unsafe || any_indiv)) {
      log.cause = joint_unsafe ? TerminationCause::joint_unsafe
                               : TerminationCause::individual_unsafe;
      return log;
    }
    joint = std::move(next);
  }
  log.cause = TerminationCause::horizon;
  return log;
}

namespace {

struct SeedResult {
  // [agent][episode]
  std::vector<std::vector<EpisodeMetrics>> metrics;
};

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const int n = int(cfg.roster.size());
  const EnvModel& env = cfg.env;

  // Known-safe seed region: episode starts accumulate into it; membership
  // additionally requires true individual safety of the cell center.
  auto start_points = std::make_shared<std::vector<Vec>>();
  const double radius = cfg.s0_radius;
  const RewardField field = env.reward_field;
  const double h = cfg.safety.h;
  RegionPred s0 = [start_points, radius, field, h](const Vec& p) {
    if (field(p) < h) return false;
    for (const Vec& s : *start_points)
      if (p.distance(s) <= radius) return true;
    return false;
  };

  std::vector<std::unique_ptr<Agent>> agents;
  for (int i = 0; i < n; ++i)
    agents.push_back(std::make_unique<Agent>(cfg.roster[size_t(i)], env, i, n,
                                             mix_seed({seed, 0xa9e1ull}), s0));

  Rng env_rng(mix_seed({seed, 0xe4aull}));
  Rng init_rng(mix_seed({seed, 0x171ull}));

  const Lattice metric_lattice(env.bounds, cfg.safety.lattice_spacing);
  std::vector<std::unordered_set<int>> visited(static_cast<size_t>(n));

  SeedResult result;
  result.metrics.assign(size_t(n), {});

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const JointState initial = sample_initial(cfg, env, init_rng);
    for (int i = 0; i < n; ++i) start_points->push_back(initial.pos[size_t(i)]);

    EpisodeLog log = run_episode(cfg, env, agents, initial, ep, env_rng);

    if (!cfg.out_dir.empty()) {
      const std::string path = cfg.out_dir + "/ep_s" + std::to_string(seed) +
                               "_e" + std::to_string(ep) + ".csv";
      write_episode_csv(path, log);
    }

    const int safe_steps =
        log.cause == TerminationCause::horizon ? log.length : log.length - 1;
    for (int i = 0; i < n; ++i) {
      EpisodeMetrics m;
      for (const StepRecord& r : log.rows) {
        if (r.agent_id != i) continue;
        m.reward += r.reward_obs;
        m.unsafe_events += (r.indiv_unsafe ? 1 : 0) + (r.joint_unsafe ? 1 : 0);
      }
      m.safe_steps = safe_steps;
      m.new_cells = new_states_visited(log, i, metric_lattice, visited[size_t(i)]);
      result.metrics[size_t(i)].push_back(m);
    }
  }
  return result;
}

}  // namespace

MetricsSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.out_dir.empty())
    std::filesystem::create_directories(cfg.out_dir);

  const int n_seeds = int(cfg.seeds.size());
  std::vector<SeedResult> results(static_cast<size_t>(n_seeds));
  const int threads = std::max(1, cfg.threads);
  for (int base = 0; base < n_seeds; base += threads) {
    std::vector<std::future<SeedResult>> futs;
    for (int k = base; k < std::min(base + threads, n_seeds); ++k)
      futs.push_back(std::async(std::launch::async, run_seed, std::cref(cfg),
                                cfg.seeds[size_t(k)]));
    for (int k = base; k < std::min(base + threads, n_seeds); ++k)
      results[size_t(k)] = futs[size_t(k - base)].get();
  }

  MetricsSummary summary;
  summary.episodes = cfg.episodes;
  summary.seeds = cfg.seeds;
  const int n = int(cfg.roster.size());
  for (int i = 0; i < n; ++i)
    summary.agent_names.push_back(to_string(cfg.roster[size_t(i)].kind));
  summary.raw.assign(size_t(n), {});
  for (int a = 0; a < n; ++a)
    for (int s = 0; s < n_seeds; ++s)
      summary.raw[size_t(a)].push_back(results[size_t(s)].metrics[size_t(a)]);
  summary.finalize();

  if (!cfg.out_dir.empty())
    write_summary_json(cfg.out_dir + "/summary.json", cfg, summary);
  return summary;
}

void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const MetricsSummary& summary) {
  nlohmann::json j;
  j["config"] = cfg.echo;
  j["episodes"] = summary.episodes;
  j["seeds"] = summary.seeds;
  nlohmann::json agents = nlohmann::json::array();
  for (size_t a = 0; a < summary.agent_names.size(); ++a) {
    nlohmann::json ja;
    ja["name"] = summary.agent_names[a];
    ja["reward_mean"] = summary.reward_mean[a];
    ja["reward_se"] = summary.reward_se[a];
    ja["unsafe_mean"] = summary.unsafe_mean[a];
    ja["unsafe_se"] = summary.unsafe_se[a];
    ja["safe_steps_mean"] = summary.safe_steps_mean[a];
    ja["safe_steps_se"] = summary.safe_steps_se[a];
    ja["new_cells_mean"] = summary.new_cells_mean[a];
    ja["new_cells_se"] = summary.new_cells_se[a];
    // Per-seed average safe steps: the safe-step distribution.
    std::vector<double> dist;
    for (size_t s = 0; s < summary.seeds.size(); ++s) {
      double sum = 0.0;
      for (const EpisodeMetrics& m : summary.raw[a][s]) sum += m.safe_steps;
      dist.push_back(sum / double(summary.episodes));
    }
    ja["safe_steps_by_seed"] = dist;
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << j.dump(2) << "\n";
}

void aggregate_summaries(const std::vector<std::string>& summary_paths,
                         const std::string& out_csv) {
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write aggregate csv: " + out_csv);
  out << "source,agent,episode,reward_mean,reward_se,unsafe_mean,unsafe_se,"
         "safe_steps_mean,safe_steps_se,new_cells_mean,new_cells_se\n";
  for (const std::string& path : summary_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open summary: " + path);
    nlohmann::json j;
    in >> j;
    const int episodes = j["episodes"].get<int>();
    for (const auto& ja : j["agents"]) {
      const std::string name = ja["name"].get<std::string>();
      for (int e = 0; e < episodes; ++e) {
        out << path << ',' << name << ',' << e;
        for (const char* key :
             {"reward_mean", "reward_se", "unsafe_mean", "unsafe_se",
              "safe_steps_mean", "safe_steps_se", "new_cells_mean",
              "new_cells_se"})
          out << ',' << fmt_double(ja[key][size_t(e)].get<double>());
        out << "\n";
      }
    }
  }
}

}  // namespace masq
