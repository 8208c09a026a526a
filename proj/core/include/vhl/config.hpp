#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vhl/attack.hpp"
#include "vhl/worldgen.hpp"

namespace vhl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full pipeline configuration. Every field has a documented default; unknown
// keys are rejected by parse_config.
struct RunConfig {
  // [run]
  uint64_t seed = 7;
  int environments = 6;
  std::string out = "out";
  int workers = 8;

  // [world]
  WorldParams world;
  int episodes_per_env = 300;
  double holdout_fraction = 0.2;
  int subimage_size = 32;

  // [agent]
  int agent_dim = 64;
  int agent_epochs = 48;
  double agent_lr = 1e-3;
  int agent_batch_size = 8;
  int max_steps = 15;

  // [attack]
  AttackConfig attack;
  int max_instances = 12;

  // [ablate]
  std::vector<int> ablate_steps_rendered = {1, 2, 3};
  std::vector<double> ablate_epsilon = {0.1, 0.3, 0.5};
  std::vector<int> ablate_instructions = {1, 2, 3};
  std::vector<int> ablate_iterations = {300, 600, 900};
  int ablate_instances = 5;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Parses `key = value` lines under [section] headers. Blank lines and lines
// starting with '#' are ignored. Unknown keys, malformed values and invariant
// violations raise ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical rendering; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

// FNV-1a over the canonical serialization, excluding run.out and run.workers
// (they do not affect results). Hex string.
std::string config_hash(const RunConfig& config);

// Applies VHL_<SECTION>_<KEY> environment overrides (e.g. VHL_ATTACK_EPSILON).
void apply_env_overrides(RunConfig& config);

}  // namespace vhl
