#pragma once

#include <map>
#include <string>
#include <vector>

#include "masq/harness.hpp"

namespace masq::cli {

using ConfigMap = std::map<std::string, std::string>;

/// Default key-value config for one of the two canonical experiments
/// ("rover" or "quadcopter").
ConfigMap default_config(const std::string& env_kind);

/// Flat `key = value` file with # comments.
ConfigMap parse_config_file(const std::string& path);

/// Later maps override earlier keys.
ConfigMap merge(ConfigMap base, const ConfigMap& overrides);

/// Materializes an experiment from a resolved config map. The map itself is
/// stored as the config echo, so re-running from an echoed summary
/// reproduces the experiment.
ExperimentConfig build_experiment(const ConfigMap& map);

/// "kind[:eps],kind[:eps],..." roster specification; the first entry is the
/// instrumented agent.
std::vector<AgentConfig> build_roster(const std::string& spec,
                                      const std::string& env_kind,
                                      const std::string& objective);

}  // namespace masq::cli
