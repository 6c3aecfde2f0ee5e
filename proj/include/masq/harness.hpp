#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "masq/agents.hpp"
#include "masq/environment.hpp"

namespace masq {

enum class TerminationCause { horizon, individual_unsafe, joint_unsafe };

std::string to_string(TerminationCause cause);

/// One logged agent-step. pos is the post-step position; reward_obs and the
/// unsafe flags refer to it. Certificate fields are populated only for
/// agents that compute an assessment (the instrumented safe agents).
struct StepRecord {
  int t = 0;
  int agent_id = 0;
  Vec pos;
  int action = 0;
  double reward_obs = 0.0;
  bool has_cert = false;
  double lr_sel = 0.0, return_sel = 0.0, lc_sel = 0.0;
  bool indiv_unsafe = false, joint_unsafe = false;
};

struct EpisodeLog {
  int n_agents = 0;
  int dim = 2;
  int length = 0;  // recorded steps
  TerminationCause cause = TerminationCause::horizon;
  std::vector<StepRecord> rows;  // step-major, length * n_agents

  bool operator==(const EpisodeLog& other) const;
};

void write_episode_csv(const std::string& path, const EpisodeLog& log);
EpisodeLog parse_episode_csv(const std::string& path);

/// Count of lattice cells first visited by one agent within this log, given
/// (and updating) the seed-history of already-visited cells.
int new_states_visited(const EpisodeLog& log, int agent_id,
                       const Lattice& lattice,
                       std::unordered_set<int>& history);

struct ExperimentConfig {
  EnvModel env;
  std::vector<AgentConfig> roster;
  SafetyConfig safety;  // thresholds used for flags and metrics lattice
  int episodes = 1;
  int steps = 1;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir;  // empty: no files written
  bool terminate_on_violation = false;
  int instrumented = 0;

  // Initial joint states: rejection-sampled from init_box (or the domain)
  // until individually and jointly safe, or fixed per agent.
  bool random_init = true;
  bool has_init_box = false;
  Box init_box;
  std::vector<Vec> fixed_init;
  double s0_radius = 3.0;  // known-safe seed region around episode starts

  int threads = 1;
  std::map<std::string, std::string> echo;  // effective flat config

  void validate() const;
};

struct EpisodeMetrics {
  double reward = 0.0;  // penalty-excluded sum of reward observations
  int unsafe_events = 0;
  int safe_steps = 0;
  int new_cells = 0;
};

struct MetricsSummary {
  std::vector<std::string> agent_names;
  int episodes = 0;
  std::vector<std::uint64_t> seeds;
  // raw[agent][seed][episode]
  std::vector<std::vector<std::vector<EpisodeMetrics>>> raw;
  // mean and standard error across seeds, per episode: [agent][episode]
  std::vector<std::vector<double>> reward_mean, reward_se;
  std::vector<std::vector<double>> unsafe_mean, unsafe_se;
  std::vector<std::vector<double>> safe_steps_mean, safe_steps_se;
  std::vector<std::vector<double>> new_cells_mean, new_cells_se;

  double mean_over_episodes(const std::vector<std::vector<double>>& series,
                            int agent, int from_episode = 0) const;
  void finalize();  // fills the derived arrays from raw
};

/// Runs one episode; agents keep learning state across calls.
EpisodeLog run_episode(const ExperimentConfig& cfg, const EnvModel& env,
                       std::vector<std::unique_ptr<Agent>>& agents,
                       const JointState& initial, int episode_index,
                       Rng& env_rng);

/// Runs seeds x episodes, agents persisting within a seed and rebuilt across
/// seeds; writes one episode CSV per (seed, episode) and one JSON summary.
MetricsSummary run_experiment(const ExperimentConfig& cfg);

void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const MetricsSummary& summary);

/// Merges summary JSON files into one CSV of mean +/- s.e. series.
void aggregate_summaries(const std::vector<std::string>& summary_paths,
                         const std::string& out_csv);

}  // namespace masq
