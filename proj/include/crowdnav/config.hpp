#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "crowdnav/orca.hpp"
#include "crowdnav/policy.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/sim.hpp"
#include "crowdnav/social_force.hpp"

namespace crowdnav {

/// Everything a command needs. Every key is optional; omitted keys keep
/// their defaults.
struct RunConfig {
  SimConfig sim;
  ppo::TrainConfig train;
  policy::PolicyConfig policy;
  orca::OrcaParams robot_orca;
  sf::SfParams robot_sf;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 1000;

  /// Derived fields that must agree across sections (policy slots and horizon).
  void sync();
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values throw ConfigError with the line number.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Applies one key; returns false for an unknown key.
bool set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Every key with its current value, in a form parse_config reads back.
std::string to_text(const RunConfig& config);

}  // namespace crowdnav
