#include "igasil/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace igasil {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto t = trim(text);
  auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty())
    throw ConfigError("invalid value '" + std::string(text) + "' for key " + std::string(key));
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const auto t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("invalid value '" + std::string(text) + "' for key " + std::string(key) + " (expected true/false)");
}

template <class Field>
ConfigKey size_key(std::string name, std::string doc, Field field) {
  return {name, std::move(doc), [field](const TrainConfig& c) { return std::to_string(field(c)); },
          [field, name](TrainConfig& c, std::string_view v) { field(c) = parse_number<std::size_t>(name, v); }};
}

template <class Field>
ConfigKey real_key(std::string name, std::string doc, Field field) {
  return {name, std::move(doc), [field](const TrainConfig& c) { return format_double(field(c)); },
          [field, name](TrainConfig& c, std::string_view v) {
            const double x = parse_number<double>(name, v);
            if (!std::isfinite(x)) throw ConfigError("value for " + name + " must be finite");
            field(c) = x;
          }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  k.push_back({"env", "environment: climbing or rescue", [](const TrainConfig& c) { return c.env; },
               [](TrainConfig& c, std::string_view v) {
                 const auto t = trim(v);
                 if (t != "climbing" && t != "rescue")
                   throw ConfigError("unknown env '" + std::string(t) + "' (valid envs: climbing, rescue)");
                 c.env = std::string(t);
               }});
  k.push_back({"variant", "learner: igasil, iac, iac_per, iddpg or igasil_onpolicy",
               [](const TrainConfig& c) { return std::string(to_string(c.variant)); },
               [](TrainConfig& c, std::string_view v) {
                 try {
                   c.variant = parse_variant(trim(v));
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(e.what());
                 }
               }});
  k.push_back(size_key("episodes", "training episodes", [](auto& c) -> auto& { return c.episodes; }));
  k.push_back({"seed", "master seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
               [](TrainConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); }});

  k.push_back(size_key("trainer.metrics_window", "episodes per metrics row",
                       [](auto& c) -> auto& { return c.metrics_window; }));
  k.push_back(size_key("trainer.warmup_episodes", "uniform-random episodes before learning starts",
                       [](auto& c) -> auto& { return c.warmup_episodes; }));
  k.push_back(size_key("trainer.updates_per_episode", "learning iterations per episode (0: 1 climbing, 4 rescue)",
                       [](auto& c) -> auto& { return c.updates_per_episode; }));
  k.push_back(size_key("trainer.batch_size", "mini-batch size for agent and discriminator updates",
                       [](auto& c) -> auto& { return c.batch_size; }));
  k.push_back(size_key("trainer.ring_capacity", "transitions kept in each agent's ring replay",
                       [](auto& c) -> auto& { return c.ring_capacity; }));
  k.push_back(size_key("trainer.checkpoint_interval", "episodes between checkpoints (0: final only)",
                       [](auto& c) -> auto& { return c.checkpoint_interval; }));
  k.push_back(size_key("trainer.eval_episodes", "greedy episodes run by eval",
                       [](auto& c) -> auto& { return c.eval_episodes; }));

  k.push_back(real_key("gasil.lambda0", "initial imitation weight", [](auto& c) -> auto& { return c.lambda0; }));
  k.push_back(real_key("gasil.growth", "per-episode growth factor of the imitation weight (0: automatic)",
                       [](auto& c) -> auto& { return c.growth; }));
  k.push_back(real_key("gasil.lambda_max", "imitation weight cap", [](auto& c) -> auto& { return c.lambda_max; }));
  k.push_back(real_key("gasil.lambda_ramp", "fraction of the budget at which automatic growth reaches the cap",
                       [](auto& c) -> auto& { return c.lambda_ramp; }));
  k.push_back(size_key("gasil.disc_steps", "discriminator steps per learning iteration",
                       [](auto& c) -> auto& { return c.disc_steps; }));
  k.push_back({"gasil.reward_form", "imitation reward: unbiased, pos_biased or neg_biased",
               [](const TrainConfig& c) { return std::string(to_string(c.reward_form)); },
               [](TrainConfig& c, std::string_view v) {
                 try {
                   c.reward_form = parse_reward_form(trim(v));
                 } catch (const std::invalid_argument& e) {
                   throw ConfigError(e.what());
                 }
               }});
  k.push_back(size_key("gasil.scer_capacity", "trajectories kept in the sub-curriculum replay",
                       [](auto& c) -> auto& { return c.scer_capacity; }));
  k.push_back(size_key("gasil.scer_subtrajectories", "sub-trajectories offered per episode",
                       [](auto& c) -> auto& { return c.scer_subtrajectories; }));
  k.push_back(size_key("gasil.disc_hidden", "discriminator hidden width", [](auto& c) -> auto& { return c.disc.hidden; }));
  k.push_back(real_key("gasil.disc_lr", "discriminator learning rate",
                       [](auto& c) -> auto& { return c.disc.learning_rate; }));
  k.push_back(real_key("gasil.disc_grad_clip", "discriminator gradient-norm clip",
                       [](auto& c) -> auto& { return c.disc.grad_clip; }));

  k.push_back(size_key("agent.hidden", "actor and critic hidden width", [](auto& c) -> auto& { return c.agent.hidden; }));
  k.push_back(real_key("agent.gamma", "discount factor", [](auto& c) -> auto& { return c.agent.gamma; }));
  k.push_back(real_key("agent.actor_lr", "actor learning rate", [](auto& c) -> auto& { return c.agent.actor_lr; }));
  k.push_back(real_key("agent.critic_lr", "critic learning rate", [](auto& c) -> auto& { return c.agent.critic_lr; }));
  k.push_back(real_key("agent.tau", "target-network soft-update rate", [](auto& c) -> auto& { return c.agent.tau; }));
  k.push_back(real_key("agent.noise_start", "initial exploration noise scale (continuous actions)",
                       [](auto& c) -> auto& { return c.agent.noise_start; }));
  k.push_back(real_key("agent.noise_end", "final exploration noise scale (continuous actions)",
                       [](auto& c) -> auto& { return c.agent.noise_end; }));
  k.push_back(real_key("agent.entropy_coef", "policy entropy bonus", [](auto& c) -> auto& { return c.agent.entropy_coef; }));
  k.push_back({"agent.importance_sampling", "truncated importance weights in the policy gradient",
               [](const TrainConfig& c) { return std::string(c.agent.importance_sampling ? "true" : "false"); },
               [](TrainConfig& c, std::string_view v) { c.agent.importance_sampling = parse_bool("agent.importance_sampling", v); }});
  k.push_back(real_key("agent.is_clip", "importance weight truncation", [](auto& c) -> auto& { return c.agent.is_clip; }));
  k.push_back(real_key("agent.grad_clip", "gradient-norm clip", [](auto& c) -> auto& { return c.agent.grad_clip; }));

  k.push_back(real_key("env.rescue.dt", "integration step", [](auto& c) -> auto& { return c.rescue.dt; }));
  k.push_back(real_key("env.rescue.damping", "velocity damping per step", [](auto& c) -> auto& { return c.rescue.damping; }));
  k.push_back(real_key("env.rescue.rescuer_accel", "rescuer acceleration", [](auto& c) -> auto& { return c.rescue.rescuer_accel; }));
  k.push_back(real_key("env.rescue.rescuer_max_speed", "rescuer speed cap",
                       [](auto& c) -> auto& { return c.rescue.rescuer_max_speed; }));
  k.push_back(real_key("env.rescue.animal_accel", "animal acceleration", [](auto& c) -> auto& { return c.rescue.animal_accel; }));
  k.push_back(real_key("env.rescue.animal_max_speed", "animal speed cap",
                       [](auto& c) -> auto& { return c.rescue.animal_max_speed; }));
  k.push_back(real_key("env.rescue.touch_radius", "contact distance", [](auto& c) -> auto& { return c.rescue.touch_radius; }));
  k.push_back(real_key("env.rescue.min_separation", "minimum spawn separation",
                       [](auto& c) -> auto& { return c.rescue.min_separation; }));
  k.push_back(real_key("env.rescue.boundary_margin", "wall repulsion margin for fleeing animals",
                       [](auto& c) -> auto& { return c.rescue.boundary_margin; }));
  k.push_back(size_key("env.rescue.horizon", "steps per episode", [](auto& c) -> auto& { return c.rescue.horizon; }));
  k.push_back({"env.rescue.t_hold", "steps a held animal waits for the partner",
               [](const TrainConfig& c) { return std::to_string(c.rescue.t_hold); },
               [](TrainConfig& c, std::string_view v) { c.rescue.t_hold = parse_number<int>("env.rescue.t_hold", v); }});
  k.push_back({"env.rescue.animal_weights", "weight file for a learned animal policy (empty: scripted flee)",
               [](const TrainConfig& c) { return c.rescue.animal_weights; },
               [](TrainConfig& c, std::string_view v) { c.rescue.animal_weights = std::string(trim(v)); }});

  k.push_back(real_key("study.threshold", "sample-efficiency return threshold",
                       [](auto& c) -> auto& { return c.study_threshold; }));
  k.push_back(size_key("study.threshold_window", "episodes averaged for the sample-efficiency threshold",
                       [](auto& c) -> auto& { return c.study_threshold_window; }));
  return k;
}

}  // namespace

std::size_t TrainConfig::resolved_updates_per_episode() const {
  if (updates_per_episode > 0) return updates_per_episode;
  return env == "rescue" ? 4 : 1;
}

ImitationSchedule TrainConfig::schedule() const {
  ImitationSchedule s{lambda0, growth, lambda_max};
  if (growth == 0.0)
    s.growth = ImitationSchedule::growth_to_reach(lambda0, lambda_max, lambda_ramp * static_cast<double>(episodes));
  return s;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

const ConfigKey& find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown config key '" + std::string(name) + "'");
}

void set_value(TrainConfig& cfg, std::string_view key, std::string_view value) { find_key(key).set(cfg, value); }

std::string get_value(const TrainConfig& cfg, std::string_view key) { return find_key(key).get(cfg); }

void apply_config_text(TrainConfig& cfg, std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

std::string serialize(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

void validate(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  const bool continuous = cfg.env == "rescue";
  if (cfg.variant == AgentVariant::iddpg)
    require(continuous, "variant iddpg needs the continuous rescue env (use iac on climbing)");
  if (cfg.variant == AgentVariant::iac)
    require(!continuous, "variant iac needs the discrete climbing env (use iddpg on rescue)");
  require(cfg.metrics_window > 0, "trainer.metrics_window must be positive");
  require(cfg.batch_size > 0, "trainer.batch_size must be positive");
  require(cfg.ring_capacity > 0, "trainer.ring_capacity must be positive");
  require(cfg.scer_capacity > 0, "gasil.scer_capacity must be positive");
  require(cfg.lambda0 >= 0.0, "gasil.lambda0 must be non-negative");
  require(cfg.lambda_max >= 0.0, "gasil.lambda_max must be non-negative");
  require(cfg.growth == 0.0 || cfg.growth >= 1.0, "gasil.growth must be 0 (automatic) or at least 1");
  require(cfg.lambda_ramp > 0.0 && cfg.lambda_ramp <= 1.0, "gasil.lambda_ramp must be in (0, 1]");
  require(cfg.disc.hidden > 0 && cfg.agent.hidden > 0, "hidden widths must be positive");
  require(cfg.disc.learning_rate > 0.0, "gasil.disc_lr must be positive");
  require(cfg.agent.gamma > 0.0 && cfg.agent.gamma <= 1.0, "agent.gamma must be in (0, 1]");
  require(cfg.agent.tau >= 0.0 && cfg.agent.tau <= 1.0, "agent.tau must be in [0, 1]");
  require(cfg.agent.actor_lr > 0.0 && cfg.agent.critic_lr > 0.0, "learning rates must be positive");
  require(cfg.agent.noise_start >= 0.0 && cfg.agent.noise_end >= 0.0, "noise scales must be non-negative");
  require(cfg.agent.entropy_coef >= 0.0, "agent.entropy_coef must be non-negative");
  require(cfg.agent.is_clip > 0.0, "agent.is_clip must be positive");
  require(cfg.agent.grad_clip > 0.0 && cfg.disc.grad_clip > 0.0, "gradient clips must be positive");
  require(cfg.rescue.dt > 0.0, "env.rescue.dt must be positive");
  require(cfg.rescue.damping >= 0.0 && cfg.rescue.damping <= 1.0, "env.rescue.damping must be in [0, 1]");
  require(cfg.rescue.horizon > 0, "env.rescue.horizon must be positive");
  require(cfg.rescue.t_hold > 0, "env.rescue.t_hold must be positive");
  require(cfg.rescue.touch_radius > 0.0, "env.rescue.touch_radius must be positive");
  require(cfg.rescue.min_separation >= 0.0 && cfg.rescue.min_separation < 0.5,
          "env.rescue.min_separation must be in [0, 0.5)");
  require(cfg.study_threshold_window > 0, "study.threshold_window must be positive");
}

std::unique_ptr<Environment> make_environment(const TrainConfig& cfg) {
  if (cfg.env == "climbing") return std::make_unique<ClimbingGame>();
  if (cfg.env == "rescue") return std::make_unique<RescueEnv>(cfg.rescue);
  throw ConfigError("unknown env '" + cfg.env + "' (valid envs: climbing, rescue)");
}

}  // namespace igasil
