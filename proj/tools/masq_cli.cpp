#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "masq/cli_config.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  int seeds = -1;
  int episodes = -1;
  int steps = -1;
  std::string out;
  int mc_samples = -1;
  double beta = -1.0;
  std::string terrain;
  std::string agents;
  std::string objective;
  int threads = -1;
  int verbosity = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "flat key=value config file");
  cmd->add_option("--seeds", f.seeds, "number of seeds");
  cmd->add_option("--episodes", f.episodes, "episodes per seed");
  cmd->add_option("--steps", f.steps, "steps per episode");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--mc-samples", f.mc_samples, "Monte-Carlo samples per integral");
  cmd->add_option("--beta", f.beta, "confidence-bound multiplier");
  cmd->add_option("--terrain", f.terrain, "terrain file (rover only)");
  cmd->add_option("--agents", f.agents, "roster, e.g. multisafe,epsgreedy:0.1");
  cmd->add_option("--objective", f.objective, "exploitation|exploration");
  cmd->add_option("--threads", f.threads, "parallel seed workers");
  cmd->add_flag("-v", f.verbosity, "verbose progress");
}

masq::cli::ConfigMap flag_overrides(const CommonFlags& f) {
  masq::cli::ConfigMap m;
  if (f.seeds >= 0) m["seeds"] = std::to_string(f.seeds);
  if (f.episodes >= 0) m["episodes"] = std::to_string(f.episodes);
  if (f.steps >= 0) m["steps"] = std::to_string(f.steps);
  if (!f.out.empty()) m["out"] = f.out;
  if (f.mc_samples >= 0) m["mc_samples"] = std::to_string(f.mc_samples);
  if (f.beta >= 0.0) m["beta"] = std::to_string(f.beta);
  if (!f.terrain.empty()) m["terrain"] = f.terrain;
  if (!f.agents.empty()) m["agents"] = f.agents;
  if (!f.objective.empty()) m["objective"] = f.objective;
  if (f.threads >= 0) m["threads"] = std::to_string(f.threads);
  return m;
}

int run_env(const std::string& env_kind, const CommonFlags& flags) {
  using namespace masq::cli;
  ConfigMap m = default_config(env_kind);
  if (!flags.config_file.empty())
    m = merge(std::move(m), parse_config_file(flags.config_file));
  m = merge(std::move(m), flag_overrides(flags));
  m["env"] = env_kind;

  const masq::ExperimentConfig cfg = build_experiment(m);
  if (flags.verbosity > 0) {
    std::printf("environment: %s  agents: %s  seeds: %zu  episodes: %d  steps: %d\n",
                env_kind.c_str(), m.at("agents").c_str(), cfg.seeds.size(),
                cfg.episodes, cfg.steps);
  }
  const masq::MetricsSummary summary = masq::run_experiment(cfg);
  for (size_t a = 0; a < summary.agent_names.size(); ++a) {
    std::printf("%-14s reward/ep %8.3f  unsafe/ep %6.3f  safe-steps/ep %7.2f  new-cells/ep %6.2f\n",
                summary.agent_names[a].c_str(),
                summary.mean_over_episodes(summary.reward_mean, int(a)),
                summary.mean_over_episodes(summary.unsafe_mean, int(a)),
                summary.mean_over_episodes(summary.safe_steps_mean, int(a)),
                summary.mean_over_episodes(summary.new_cells_mean, int(a)));
  }
  if (!cfg.out_dir.empty())
    std::printf("wrote %s/summary.json\n", cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized multi-agent safe Q-learning simulator"};
  app.require_subcommand(1);

  CommonFlags rover_flags, quad_flags, custom_flags;
  CLI::App* rover = app.add_subcommand("run-rover", "terrain-rover experiment");
  add_common(rover, rover_flags);
  CLI::App* quad =
      app.add_subcommand("run-quadcopter", "quadcopter-pair experiment");
  add_common(quad, quad_flags);
  CLI::App* custom = app.add_subcommand("run-custom", "experiment from a config file");
  add_common(custom, custom_flags);
  custom->get_option("--config")->required();

  std::vector<std::string> summary_paths;
  std::string aggregate_out = "aggregate.csv";
  CLI::App* agg = app.add_subcommand("aggregate", "merge summary JSONs into one CSV");
  agg->add_option("--out", aggregate_out, "output CSV path");
  agg->add_option("summaries", summary_paths, "summary.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (rover->parsed()) return run_env("rover", rover_flags);
    if (quad->parsed()) return run_env("quadcopter", quad_flags);
    if (custom->parsed()) {
      using namespace masq::cli;
      ConfigMap file = parse_config_file(custom_flags.config_file);
      if (!file.count("env"))
        throw std::runtime_error("config file must set env=rover|quadcopter");
      ConfigMap m = merge(default_config(file.at("env")), file);
      m = merge(std::move(m), flag_overrides(custom_flags));
      const masq::ExperimentConfig cfg = build_experiment(m);
      const masq::MetricsSummary summary = masq::run_experiment(cfg);
      for (size_t a = 0; a < summary.agent_names.size(); ++a)
        std::printf("%-14s reward/ep %8.3f  unsafe/ep %6.3f\n",
                    summary.agent_names[a].c_str(),
                    summary.mean_over_episodes(summary.reward_mean, int(a)),
                    summary.mean_over_episodes(summary.unsafe_mean, int(a)));
      return 0;
    }
    if (agg->parsed()) {
      masq::aggregate_summaries(summary_paths, aggregate_out);
      std::printf("wrote %s\n", aggregate_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
