#include "igasil/envs.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace igasil {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::catch_a: return "a";
    case Outcome::catch_b: return "b";
    case Outcome::catch_c: return "c";
    case Outcome::on_the_road: return "road";
  }
  return "?";
}

PayoffMatrix PayoffMatrix::rescue_table() {
  PayoffMatrix m;
  m.values = {{
      {11.0, -30.0, 0.0, -30.0},
      {-30.0, 7.0, 6.0, -10.0},
      {0.0, 6.0, 5.0, 0.0},
      {-30.0, -10.0, 0.0, 0.0},
  }};
  return m;
}

bool PayoffMatrix::symmetric() const {
  for (std::size_t i = 0; i < kOutcomeCount; ++i)
    for (std::size_t j = 0; j < kOutcomeCount; ++j)
      if (values[i][j] != values[j][i]) return false;
  return true;
}

double payoff(const PayoffMatrix& m, Outcome i, Outcome j) { return m(i, j); }

AgentAction AgentAction::discrete(int index, std::size_t n) {
  if (index < 0 || static_cast<std::size_t>(index) >= n) throw std::out_of_range("discrete action index out of range");
  AgentAction a;
  a.values = Vec::Zero(static_cast<Eigen::Index>(n));
  a.values[index] = 1.0;
  a.index = index;
  return a;
}

AgentAction AgentAction::continuous(Vec values) {
  AgentAction a;
  a.values = std::move(values);
  return a;
}

// ------------------------------------------------------------ climbing game

ClimbingGame::ClimbingGame(PayoffMatrix payoff) : payoff_(payoff) {}

std::vector<Vec> ClimbingGame::reset(std::uint64_t) {
  state_ = {};
  return {Vec::Ones(1), Vec::Ones(1)};
}

JointStepResult ClimbingGame::step(int a0, int a1) {
  for (int a : {a0, a1})
    if (a < 0 || a >= static_cast<int>(kOutcomeCount))
      throw std::out_of_range("climbing game action must be in {0,1,2,3}");
  state_.last_actions = {a0, a1};
  state_.step_count += 1;
  JointStepResult r;
  r.observations = {Vec::Ones(1), Vec::Ones(1)};
  const OutcomePair o{static_cast<Outcome>(a0), static_cast<Outcome>(a1)};
  r.reward = payoff_(o.first, o.second);
  r.done = true;
  r.info.outcome = o;
  return r;
}

JointStepResult ClimbingGame::step(const std::vector<AgentAction>& actions) {
  if (actions.size() != 2) throw std::invalid_argument("climbing game takes exactly two actions");
  return step(actions[0].index, actions[1].index);
}

// ------------------------------------------------------------------ rescue

namespace {

Vec2 clip_norm(Vec2 v, double max_norm) {
  const double n = v.norm();
  if (n > max_norm) v *= max_norm / n;
  return v;
}

Vec2 clip_box(Vec2 v, double bound) { return v.cwiseMax(-bound).cwiseMin(bound); }

void integrate(Vec2& pos, Vec2& vel, const Vec2& action, double accel, double max_speed, const RescueConfig& cfg) {
  vel = vel * (1.0 - cfg.damping) + action * accel * cfg.dt;
  vel = clip_norm(vel, max_speed);
  pos = clip_box(pos + vel * cfg.dt, cfg.arena);
}

// Nearest animal in contact with `rescuer`, if any.
std::optional<std::size_t> contact(const RescueState& s, const RescueConfig& cfg, std::size_t rescuer) {
  std::optional<std::size_t> best;
  double best_d = cfg.touch_radius;
  for (std::size_t j = 0; j < kAnimals; ++j) {
    const double d = (s.rescuer_pos[rescuer] - s.animal_pos[j]).norm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

RescueState rescue_reset(const RescueConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-cfg.arena, cfg.arena);
  std::vector<Vec2> placed;
  auto place = [&]() {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      Vec2 p(u(rng), u(rng));
      const bool ok = std::all_of(placed.begin(), placed.end(),
                                  [&](const Vec2& q) { return (p - q).norm() >= cfg.min_separation; });
      if (ok) {
        placed.push_back(p);
        return p;
      }
    }
    throw std::runtime_error("rescue_reset: cannot satisfy minimum separation");
  };
  RescueState s;
  for (auto& p : s.rescuer_pos) p = place();
  for (auto& p : s.animal_pos) p = place();
  for (auto& v : s.rescuer_vel) v.setZero();
  for (auto& v : s.animal_vel) v.setZero();
  return s;
}

Vec2 animal_policy(const RescueState& s, const RescueConfig& cfg, std::size_t animal) {
  const Vec2& p = s.animal_pos[animal];
  std::size_t nearest = 0;
  for (std::size_t r = 1; r < kRescuers; ++r)
    if ((s.rescuer_pos[r] - p).norm() < (s.rescuer_pos[nearest] - p).norm()) nearest = r;
  Vec2 away = p - s.rescuer_pos[nearest];
  const double d = away.norm();
  Vec2 a = d > 0.0 ? Vec2(away / d) : Vec2(1.0, 0.0);

  const double inner = cfg.arena - cfg.boundary_margin;
  for (int k = 0; k < 2; ++k) {
    if (p[k] > inner) a[k] -= (p[k] - inner) / cfg.boundary_margin;
    if (p[k] < -inner) a[k] += (-inner - p[k]) / cfg.boundary_margin;
  }
  return clip_norm(clip_box(a, 1.0), 1.0);
}

Vec animal_observe(const RescueState& s, std::size_t animal) {
  Vec o(8);
  o << s.animal_pos[animal], s.animal_vel[animal], s.rescuer_pos[0] - s.animal_pos[animal],
      s.rescuer_pos[1] - s.animal_pos[animal];
  return o;
}

Vec rescue_observe(const RescueState& s, const RescueConfig& cfg, std::size_t agent) {
  if (agent >= kRescuers) throw std::out_of_range("rescue_observe: bad agent index");
  const std::size_t other = 1 - agent;
  const Vec2& p = s.rescuer_pos[agent];
  const Vec2& v = s.rescuer_vel[agent];
  Vec o(static_cast<Eigen::Index>(kRescueObsDim));
  Eigen::Index k = 0;
  auto put = [&](const Vec2& x) {
    o[k++] = x[0];
    o[k++] = x[1];
  };
  put(p);
  put(v);
  put(s.rescuer_pos[other] - p);
  for (const auto& a : s.animal_pos) put(a - p);
  for (const auto& av : s.animal_vel) put(av - v);
  for (std::size_t j = 0; j < kAnimals; ++j) o[k++] = s.held(j) ? 1.0 : 0.0;
  o[k++] = s.hold_owner ? static_cast<double>(s.hold_timer) / static_cast<double>(cfg.t_hold) : 0.0;
  return o;
}

std::array<int, kAnimals> touch_counter(const RescueState& s) { return s.touches; }

JointStepResult rescue_step(RescueState& s, const RescueConfig& cfg, const PayoffMatrix& payoff,
                            const std::array<Vec2, kRescuers>& actions, const Mlp* animal_net) {
  if (s.episode_done) throw std::logic_error("rescue_step called on a finished episode");
  s.step_count += 1;

  std::array<Vec2, kAnimals> animal_actions;
  for (std::size_t j = 0; j < kAnimals; ++j) {
    if (s.held(j)) continue;
    if (animal_net) {
      const Vec out = animal_net->forward_one(animal_observe(s, j));
      animal_actions[j] = clip_box(Vec2(out[0], out[1]), 1.0);
    } else {
      animal_actions[j] = animal_policy(s, cfg, j);
    }
  }
  for (std::size_t r = 0; r < kRescuers; ++r) {
    if (!actions[r].allFinite()) throw std::invalid_argument("rescue_step: non-finite action");
    integrate(s.rescuer_pos[r], s.rescuer_vel[r], clip_box(actions[r], 1.0), cfg.rescuer_accel,
              cfg.rescuer_max_speed, cfg);
  }
  for (std::size_t j = 0; j < kAnimals; ++j) {
    if (s.held(j)) {
      s.animal_vel[j].setZero();
      continue;
    }
    integrate(s.animal_pos[j], s.animal_vel[j], animal_actions[j], cfg.animal_accel, cfg.animal_max_speed, cfg);
  }

  for (std::size_t r = 0; r < kRescuers; ++r)
    for (std::size_t j = 0; j < kAnimals; ++j)
      if (!s.touched[r][j] && (s.rescuer_pos[r] - s.animal_pos[j]).norm() < cfg.touch_radius) {
        s.touched[r][j] = true;
        s.touches[j] += 1;
      }

  std::optional<OutcomePair> outcome;
  if (!s.hold_owner) {
    const auto c0 = contact(s, cfg, 0);
    const auto c1 = contact(s, cfg, 1);
    if (c0 && c1) {
      outcome = OutcomePair{static_cast<Outcome>(*c0), static_cast<Outcome>(*c1)};
    } else if (c0 || c1) {
      const std::size_t r = c0 ? 0 : 1;
      const std::size_t j = c0 ? *c0 : *c1;
      s.hold_owner = HoldOwner{j, r};
      s.hold_timer = cfg.t_hold;
      s.animal_vel[j].setZero();
    }
  } else {
    const HoldOwner h = *s.hold_owner;
    const auto partner = contact(s, cfg, 1 - h.rescuer);
    if (partner) {
      outcome = OutcomePair{static_cast<Outcome>(h.animal), static_cast<Outcome>(*partner)};
    } else if (--s.hold_timer <= 0) {
      s.hold_timer = 0;
      outcome = OutcomePair{static_cast<Outcome>(h.animal), Outcome::on_the_road};
    }
  }
  if (!outcome && s.step_count >= cfg.horizon) {
    outcome = s.hold_owner ? OutcomePair{static_cast<Outcome>(s.hold_owner->animal), Outcome::on_the_road}
                           : OutcomePair{Outcome::on_the_road, Outcome::on_the_road};
  }

  JointStepResult res;
  if (outcome) {
    s.episode_done = true;
    s.terminal_outcome = outcome;
    res.done = true;
    res.reward = payoff(outcome->first, outcome->second);
    res.info.outcome = outcome;
  }
  res.info.touches = s.touches;
  for (std::size_t r = 0; r < kRescuers; ++r) res.observations.push_back(rescue_observe(s, cfg, r));
  return res;
}

RescueEnv::RescueEnv(RescueConfig cfg, PayoffMatrix payoff) : cfg_(std::move(cfg)), payoff_(payoff) {
  if (!cfg_.animal_weights.empty()) {
    Mlp net = load_weights(std::filesystem::path(cfg_.animal_weights));
    if (net.input_dim() != 8 || net.output_dim() != 2)
      throw std::runtime_error("animal policy weights must map 8 inputs to 2 outputs");
    animal_net_ = std::move(net);
  }
}

std::vector<Vec> RescueEnv::reset(std::uint64_t seed) {
  state_ = rescue_reset(cfg_, seed);
  std::vector<Vec> obs;
  for (std::size_t r = 0; r < kRescuers; ++r) obs.push_back(rescue_observe(state_, cfg_, r));
  return obs;
}

JointStepResult RescueEnv::step(const std::vector<AgentAction>& actions) {
  if (actions.size() != kRescuers) throw std::invalid_argument("rescue env takes exactly two actions");
  std::array<Vec2, kRescuers> a;
  for (std::size_t r = 0; r < kRescuers; ++r) {
    if (actions[r].values.size() != 2) throw std::invalid_argument("rescue actions are 2-dimensional");
    a[r] = Vec2(actions[r].values[0], actions[r].values[1]);
  }
  return rescue_step(state_, cfg_, payoff_, a, animal_net_ ? &*animal_net_ : nullptr);
}

}  // namespace igasil
