#pragma once

// Independent learners consuming (possibly reshaped) rewards: DDPG for the
// continuous rescue task and an off-policy advantage actor-critic for the
// discrete matrix game.

#include "igasil/buffers.hpp"
#include "igasil/envs.hpp"
#include "igasil/net.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace igasil {

enum class AgentVariant { igasil, iac, iac_per, iddpg, igasil_onpolicy };

std::string_view to_string(AgentVariant v);
AgentVariant parse_variant(std::string_view s);
/// Variants that train a discriminator and reshape rewards.
bool uses_discriminator(AgentVariant v);
/// Sub-trajectories offered per episode for this variant (0 for iac_per).
std::size_t scer_subtrajectories(AgentVariant v, std::size_t configured);
bool is_on_policy(AgentVariant v);

struct AgentConfig {
  std::size_t hidden = 64;
  double gamma = 0.95;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double tau = 0.01;
  double noise_start = 0.1;
  double noise_end = 0.02;
  double entropy_coef = 0.01;
  bool importance_sampling = false;
  double is_clip = 2.0;
  double grad_clip = 10.0;
};

struct ActResult {
  AgentAction action;
  std::optional<double> behavior_logp;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double policy_objective = 0.0;
  double entropy = 0.0;
};

struct LossAndGrad {
  double value;
  Gradients grad;  // d value / d params
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual ActResult act(const Vec& obs, bool explore, std::mt19937_64& rng) const = 0;
  /// Uniform exploration used before learning starts.
  virtual ActResult random_action(std::mt19937_64& rng) const = 0;
  virtual UpdateStats update(const std::vector<Transition>& batch) = 0;
  /// Linear noise annealing hook; progress in [0, 1].
  virtual void set_progress(double) {}
  virtual std::vector<std::pair<std::string, const Mlp*>> networks() const = 0;
  virtual void load_network(std::string_view role, Mlp net) = 0;
  double checksum() const;
};

void soft_update(Mlp& target, const Mlp& online, double tau);

// ---------------------------------------------------------------------- A2C

class A2cAgent final : public Agent {
 public:
  A2cAgent(std::size_t obs_dim, std::size_t n_actions, const AgentConfig& cfg, std::mt19937_64& rng);

  ActResult act(const Vec& obs, bool explore, std::mt19937_64& rng) const override;
  ActResult random_action(std::mt19937_64& rng) const override;
  UpdateStats update(const std::vector<Transition>& batch) override;
  std::vector<std::pair<std::string, const Mlp*>> networks() const override;
  void load_network(std::string_view role, Mlp net) override;

  /// log pi(.|obs), computed stably from the logits.
  Vec log_policy(const Vec& obs) const;
  std::size_t n_actions() const { return n_actions_; }

  Mlp actor;   // softmax head
  Mlp critic;  // state value
  AdamState actor_adam;
  AdamState critic_adam;
  AgentConfig cfg;

 private:
  std::size_t n_actions_;
};

/// TD targets r + gamma (1 - done) V(s').
Vec a2c_targets(const A2cAgent& agent, const std::vector<Transition>& batch);
/// mean (V(s) - y)^2 and its gradient w.r.t. the critic.
LossAndGrad a2c_critic_loss(const A2cAgent& agent, const std::vector<Transition>& batch);
/// mean[w log pi(a|s) A] + entropy_coef mean[H], its gradient w.r.t. the
/// actor, and the batch-mean entropy. Advantages are held constant.
struct PolicyObjective {
  double value;
  Gradients grad;
  double entropy;
};
PolicyObjective a2c_policy_objective(const A2cAgent& agent, const std::vector<Transition>& batch);
UpdateStats a2c_update(A2cAgent& agent, const std::vector<Transition>& batch);

// --------------------------------------------------------------------- DDPG

class DdpgAgent final : public Agent {
 public:
  DdpgAgent(std::size_t obs_dim, std::size_t action_dim, const AgentConfig& cfg, std::mt19937_64& rng);

  ActResult act(const Vec& obs, bool explore, std::mt19937_64& rng) const override;
  ActResult random_action(std::mt19937_64& rng) const override;
  UpdateStats update(const std::vector<Transition>& batch) override;
  void set_progress(double progress) override;
  std::vector<std::pair<std::string, const Mlp*>> networks() const override;
  void load_network(std::string_view role, Mlp net) override;

  double noise_scale() const { return sigma_; }
  std::size_t action_dim() const { return action_dim_; }

  Mlp actor;   // tanh head
  Mlp critic;  // Q(s, a)
  Mlp target_actor;
  Mlp target_critic;
  AdamState actor_adam;
  AdamState critic_adam;
  AgentConfig cfg;

 private:
  std::size_t action_dim_;
  double sigma_;
};

/// y = r + gamma (1 - done) Q_target(s', actor_target(s')).
Vec ddpg_targets(const DdpgAgent& agent, const std::vector<Transition>& batch);
LossAndGrad ddpg_critic_loss(const DdpgAgent& agent, const std::vector<Transition>& batch);
/// mean Q(s, actor(s)) and its gradient w.r.t. the actor.
LossAndGrad ddpg_actor_objective(const DdpgAgent& agent, const std::vector<Transition>& batch);
struct DdpgStats {
  double critic_loss;
  double actor_objective;
};
DdpgStats ddpg_update(DdpgAgent& agent, const std::vector<Transition>& batch);

std::unique_ptr<Agent> make_agent(const ActionSpace& space, std::size_t obs_dim, const AgentConfig& cfg,
                                  std::mt19937_64& rng);

}  // namespace igasil
