#pragma once

// Fully cooperative two-agent environments with a shared terminal reward:
// the one-shot climbing matrix game and the continuous wildlife-rescue chase.

#include "igasil/net.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace igasil {

enum class Outcome : int { catch_a = 0, catch_b = 1, catch_c = 2, on_the_road = 3 };
inline constexpr std::size_t kOutcomeCount = 4;

std::string_view to_string(Outcome o);

struct PayoffMatrix {
  std::array<std::array<double, kOutcomeCount>, kOutcomeCount> values{};

  /// The rescue payoff table: catching the same animal pays 11 / 7 / 5, a
  /// lone catch of `a` costs 30, and so on.
  static PayoffMatrix rescue_table();
  double operator()(Outcome i, Outcome j) const {
    return values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  bool symmetric() const;
};

double payoff(const PayoffMatrix& m, Outcome i, Outcome j);

using OutcomePair = std::pair<Outcome, Outcome>;

enum class ActionKind { discrete, continuous };

struct ActionSpace {
  ActionKind kind;
  std::size_t dim;  // number of choices (discrete) or components (continuous)
};

struct AgentAction {
  Vec values;      // continuous components, or one-hot for discrete actions
  int index = -1;  // discrete choice

  static AgentAction discrete(int index, std::size_t n);
  static AgentAction continuous(Vec values);
};

struct StepInfo {
  std::optional<OutcomePair> outcome;
  std::array<int, 3> touches{};
};

struct JointStepResult {
  std::vector<Vec> observations;
  double reward = 0.0;  // shared by every agent
  bool done = false;
  StepInfo info;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string_view id() const = 0;
  virtual std::size_t n_agents() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual ActionSpace action_space() const = 0;
  virtual std::size_t horizon() const = 0;
  virtual std::vector<Vec> reset(std::uint64_t seed) = 0;
  virtual JointStepResult step(const std::vector<AgentAction>& actions) = 0;
};

// ------------------------------------------------------------ climbing game

struct ClimbingGameState {
  std::array<int, 2> last_actions{-1, -1};
  std::size_t step_count = 0;
};

/// Stateless one-shot version of the payoff table. Actions 0..3 map to
/// catch_a, catch_b, catch_c, on_the_road; the observation is the constant [1].
class ClimbingGame final : public Environment {
 public:
  explicit ClimbingGame(PayoffMatrix payoff = PayoffMatrix::rescue_table());

  std::string_view id() const override { return "climbing"; }
  std::size_t n_agents() const override { return 2; }
  std::size_t obs_dim() const override { return 1; }
  ActionSpace action_space() const override { return {ActionKind::discrete, kOutcomeCount}; }
  std::size_t horizon() const override { return 1; }
  std::vector<Vec> reset(std::uint64_t seed) override;
  JointStepResult step(const std::vector<AgentAction>& actions) override;

  const ClimbingGameState& state() const { return state_; }
  JointStepResult step(int a0, int a1);

 private:
  PayoffMatrix payoff_;
  ClimbingGameState state_;
};

// ------------------------------------------------------------------ rescue

using Vec2 = Eigen::Vector2d;

inline constexpr std::size_t kRescuers = 2;
inline constexpr std::size_t kAnimals = 3;
inline constexpr std::size_t kRescueObsDim = 2 + 2 + 2 + 2 * kAnimals + 2 * kAnimals + kAnimals + 1;

struct RescueConfig {
  double dt = 0.1;
  double damping = 0.25;
  double rescuer_accel = 3.0;
  double rescuer_max_speed = 1.0;
  double animal_accel = 4.0;
  double animal_max_speed = 1.3;
  double touch_radius = 0.1;
  double arena = 1.0;  // arena is [-arena, arena]^2
  double min_separation = 0.2;
  double boundary_margin = 0.1;
  std::size_t horizon = 50;
  int t_hold = 8;
  /// Optional weight file for a learned animal policy (8 inputs, 2 tanh outputs).
  std::string animal_weights;
};

struct HoldOwner {
  std::size_t animal;
  std::size_t rescuer;
  friend bool operator==(const HoldOwner&, const HoldOwner&) = default;
};

struct RescueState {
  std::array<Vec2, kRescuers> rescuer_pos;
  std::array<Vec2, kRescuers> rescuer_vel;
  std::array<Vec2, kAnimals> animal_pos;
  std::array<Vec2, kAnimals> animal_vel;
  std::optional<HoldOwner> hold_owner;
  int hold_timer = 0;
  std::size_t step_count = 0;
  bool episode_done = false;
  std::optional<OutcomePair> terminal_outcome;
  std::array<int, kAnimals> touches{};
  std::array<std::array<bool, kAnimals>, kRescuers> touched{};

  bool held(std::size_t animal) const { return hold_owner && hold_owner->animal == animal; }
  friend bool operator==(const RescueState&, const RescueState&) = default;
};

RescueState rescue_reset(const RescueConfig& cfg, std::uint64_t seed);
Vec rescue_observe(const RescueState& s, const RescueConfig& cfg, std::size_t agent);
/// Scripted flee: unit push away from the nearest rescuer plus wall repulsion.
Vec2 animal_policy(const RescueState& s, const RescueConfig& cfg, std::size_t animal);
Vec animal_observe(const RescueState& s, std::size_t animal);
/// Advances one step. `animal_net`, when given, replaces the scripted flee.
JointStepResult rescue_step(RescueState& s, const RescueConfig& cfg, const PayoffMatrix& payoff,
                            const std::array<Vec2, kRescuers>& actions, const Mlp* animal_net = nullptr);
std::array<int, kAnimals> touch_counter(const RescueState& s);

class RescueEnv final : public Environment {
 public:
  explicit RescueEnv(RescueConfig cfg = {}, PayoffMatrix payoff = PayoffMatrix::rescue_table());

  std::string_view id() const override { return "rescue"; }
  std::size_t n_agents() const override { return kRescuers; }
  std::size_t obs_dim() const override { return kRescueObsDim; }
  ActionSpace action_space() const override { return {ActionKind::continuous, 2}; }
  std::size_t horizon() const override { return cfg_.horizon; }
  std::vector<Vec> reset(std::uint64_t seed) override;
  JointStepResult step(const std::vector<AgentAction>& actions) override;

  const RescueState& state() const { return state_; }
  RescueState& mutable_state() { return state_; }
  const RescueConfig& config() const { return cfg_; }

 private:
  RescueConfig cfg_;
  PayoffMatrix payoff_;
  RescueState state_;
  std::optional<Mlp> animal_net_;
};

}  // namespace igasil
