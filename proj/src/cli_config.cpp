#include "masq/cli_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "masq/presets.hpp"

namespace masq::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double as_double(const ConfigMap& m, const std::string& key) {
  return std::stod(m.at(key));
}

int as_int(const ConfigMap& m, const std::string& key) {
  return std::stoi(m.at(key));
}

bool as_bool(const ConfigMap& m, const std::string& key) {
  const std::string& v = m.at(key);
  return v == "1" || v == "true" || v == "yes";
}

AgentKind kind_from(const std::string& name) {
  if (name == "multisafe") return AgentKind::MultiSafeQ;
  if (name == "naive") return AgentKind::NaiveQ;
  if (name == "bayesian") return AgentKind::BayesianQ;
  if (name == "safeq") return AgentKind::SafeQ;
  if (name == "singlesafemdp") return AgentKind::SingleSafeMDP;
  if (name == "epsgreedy") return AgentKind::EpsGreedyQ;
  throw std::invalid_argument("unknown agent kind: " + name);
}

}  // namespace

ConfigMap default_config(const std::string& env_kind) {
  ConfigMap m;
  m["env"] = env_kind;
  m["objective"] = "exploitation";
  m["out"] = "";
  m["threads"] = "1";
  m["mc_samples"] = "32";
  m["beta"] = "2";
  m["gamma"] = "0.9";
  m["infer_every"] = "10";
  m["verbosity"] = "0";
  if (env_kind == "rover") {
    m["seeds"] = "10";
    m["episodes"] = "20";
    m["steps"] = "50";
    m["agents"] = "multisafe,epsgreedy,epsgreedy,epsgreedy";
    m["size_m"] = "20";
    m["terrain"] = "";
    m["terrain_seed"] = "10";
    m["h"] = "-0.5";
    m["tau"] = "1";
    m["c"] = "0.7";
    m["joint_threshold"] = "0.1";
    m["noise_var"] = "0.1";
    m["eta"] = "0.1";
    m["rho"] = "1";
    m["kernel_length"] = "5";
    m["kernel_signal"] = "1.2";
    m["kernel_noise"] = "0.3";
    m["sset_refresh"] = "5";
    m["merge_cap"] = "400";
    m["terminate_on_violation"] = "0";
    m["init_halfwidth"] = "2";
    m["s0_radius"] = "3";
  } else if (env_kind == "quadcopter") {
    m["seeds"] = "10";
    m["episodes"] = "100";
    m["steps"] = "100";
    m["agents"] = "multisafe,epsgreedy:0.1";
    m["h"] = "-8";
    m["tau"] = "1";
    m["c"] = "0.7";
    m["joint_threshold"] = "3";
    m["noise_var"] = "0.1";
    m["eta"] = "0.1";
    m["rho"] = "0.5";
    m["kernel_length"] = "2";
    m["kernel_signal"] = "1";
    m["kernel_noise"] = "0.3";
    m["sset_refresh"] = "25";
    m["merge_cap"] = "400";
    m["terminate_on_violation"] = "1";
    m["s0_radius"] = "1.5";
  } else {
    throw std::invalid_argument("unknown environment: " + env_kind);
  }
  return m;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ConfigMap m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    m[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return m;
}

ConfigMap merge(ConfigMap base, const ConfigMap& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
  return base;
}

std::vector<AgentConfig> build_roster(const std::string& spec,
                                      const std::string& env_kind,
                                      const std::string& objective) {
  std::vector<AgentConfig> roster;
  std::istringstream ss(spec);
  std::string item;
  const Objective obj = objective == "exploration" ? Objective::exploration
                                                   : Objective::exploitation;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    double eps = -1.0;  // per-seed random unless specified
    const auto colon = item.find(':');
    if (colon != std::string::npos) {
      eps = std::stod(item.substr(colon + 1));
      item = item.substr(0, colon);
    }
    AgentConfig cfg = env_kind == "quadcopter"
                          ? quadcopter_agent_defaults(kind_from(item))
                          : rover_agent_defaults(kind_from(item), obj);
    if (cfg.kind == AgentKind::EpsGreedyQ) {
      cfg.eps_greedy = eps;
    } else if (eps >= 0.0) {
      cfg.eps_greedy = eps;
    }
    roster.push_back(std::move(cfg));
  }
  if (roster.empty()) throw std::invalid_argument("empty agent roster");
  return roster;
}

ExperimentConfig build_experiment(const ConfigMap& map) {
  const std::string env_kind = map.at("env");
  ConfigMap m = merge(default_config(env_kind), map);

  ExperimentConfig cfg;
  if (env_kind == "rover") {
    const double size = as_double(m, "size_m");
    RewardField terrain =
        m.at("terrain").empty()
            ? synthetic_terrain(std::stoull(m.at("terrain_seed")), size, 0.5)
            : load_terrain(m.at("terrain"));
    cfg.env = make_rover_env(std::move(terrain), size);
    cfg.random_init = true;
    cfg.has_init_box = true;
    const double mid = size / 2.0, hw = as_double(m, "init_halfwidth");
    cfg.init_box = {Vec(mid - hw, mid - hw), Vec(mid + hw, mid + hw)};
  } else {
    cfg.env = make_quadcopter_env();
    cfg.random_init = false;
    cfg.fixed_init = {Vec(0.5, 0.0, 0.0), Vec(-0.5, 0.0, 0.0)};
  }
  cfg.env.noise_var = as_double(m, "noise_var");
  cfg.env.obs_noise_std = as_double(m, "eta");
  cfg.env.unsafe_joint.threshold = as_double(m, "joint_threshold");

  cfg.roster = build_roster(m.at("agents"), env_kind, m.at("objective"));
  if (!cfg.random_init && int(cfg.roster.size()) != int(cfg.fixed_init.size()))
    throw std::invalid_argument(
        "quadcopter experiments take exactly two agents");

  SafetyConfig safety;
  safety.h = as_double(m, "h");
  safety.tau = as_double(m, "tau");
  safety.c = as_double(m, "c");
  safety.mc_samples = as_int(m, "mc_samples");
  safety.lattice_spacing = as_double(m, "rho");
  const KernelSpec kernel{as_double(m, "kernel_length"),
                          as_double(m, "kernel_signal"),
                          as_double(m, "kernel_noise")};
  for (AgentConfig& a : cfg.roster) {
    a.safety = safety;
    a.kernel = kernel;
    a.beta = BetaSchedule::constant(as_double(m, "beta"));
    a.td.gamma = as_double(m, "gamma");
    a.sset_refresh = as_int(m, "sset_refresh");
    a.infer_every = as_int(m, "infer_every");
    a.gp_merge_cap = as_int(m, "merge_cap");
  }
  cfg.safety = safety;

  cfg.episodes = as_int(m, "episodes");
  cfg.steps = as_int(m, "steps");
  cfg.seeds = seed_list(as_int(m, "seeds"));
  cfg.out_dir = m.at("out");
  cfg.terminate_on_violation = as_bool(m, "terminate_on_violation");
  cfg.s0_radius = as_double(m, "s0_radius");
  cfg.threads = as_int(m, "threads");
  cfg.instrumented = 0;
  cfg.echo = m;
  cfg.validate();
  return cfg;
}

}  // namespace masq::cli
