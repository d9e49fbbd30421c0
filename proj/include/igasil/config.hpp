#pragma once

// Flat `key = value` experiment configuration. Every key has a default and a
// one-line description; unknown keys and malformed values are errors.

#include "igasil/agents.hpp"
#include "igasil/envs.hpp"
#include "igasil/gasil.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace igasil {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  std::string env = "climbing";
  AgentVariant variant = AgentVariant::igasil;
  std::size_t episodes = 20000;
  std::uint64_t seed = 1;

  std::size_t metrics_window = 1000;
  std::size_t warmup_episodes = 500;
  std::size_t updates_per_episode = 0;  // 0: 1 for climbing, 4 for rescue
  std::size_t batch_size = 64;
  std::size_t ring_capacity = 100000;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::size_t eval_episodes = 100;

  double lambda0 = 0.1;
  double growth = 0.0;  // 0: reach lambda_max at `lambda_ramp` of the budget
  double lambda_max = 1.0;
  double lambda_ramp = 0.3;
  std::size_t disc_steps = 2;
  RewardForm reward_form = RewardForm::unbiased;
  std::size_t scer_capacity = 64;
  std::size_t scer_subtrajectories = 4;
  DiscriminatorConfig disc;

  AgentConfig agent;
  RescueConfig rescue;

  double study_threshold = 4.5;
  std::size_t study_threshold_window = 100;

  std::size_t resolved_updates_per_episode() const;
  ImitationSchedule schedule() const;
};

struct ConfigKey {
  std::string name;
  std::string doc;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

/// Every recognised key, in serialization order.
const std::vector<ConfigKey>& config_keys();
const ConfigKey& find_key(std::string_view name);

void set_value(TrainConfig& cfg, std::string_view key, std::string_view value);
std::string get_value(const TrainConfig& cfg, std::string_view key);

/// Applies `key = value` lines on top of `cfg`. `origin` names the source in errors.
void apply_config_text(TrainConfig& cfg, std::string_view text, std::string_view origin = "config");
void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path);

/// Resolved config, one `key = value` line per key.
std::string serialize(const TrainConfig& cfg);

/// Cross-field checks; throws ConfigError.
void validate(const TrainConfig& cfg);

std::unique_ptr<Environment> make_environment(const TrainConfig& cfg);

}  // namespace igasil
