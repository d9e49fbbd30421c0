#include "igasil/envs.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace igasil;

namespace {

constexpr Outcome A = Outcome::catch_a, B = Outcome::catch_b, C = Outcome::catch_c, R = Outcome::on_the_road;

// Animals parked far apart in corners, rescuers far from all of them.
RescueState quiet_state() {
  RescueState s;
  s.rescuer_pos = {Vec2(-0.5, 0.0), Vec2(0.5, 0.0)};
  s.rescuer_vel = {Vec2::Zero(), Vec2::Zero()};
  s.animal_pos = {Vec2(0.0, 0.9), Vec2(-0.9, -0.9), Vec2(0.9, -0.9)};
  s.animal_vel = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  return s;
}

const std::array<Vec2, kRescuers> kIdle{Vec2::Zero(), Vec2::Zero()};

}  // namespace

TEST_SUITE("envs") {

TEST_CASE("payoff table") {
  const PayoffMatrix m = PayoffMatrix::rescue_table();
  CHECK(payoff(m, A, A) == 11);
  CHECK(payoff(m, A, B) == -30);
  CHECK(payoff(m, A, C) == 0);
  CHECK(payoff(m, A, R) == -30);
  CHECK(payoff(m, B, B) == 7);
  CHECK(payoff(m, B, C) == 6);
  CHECK(payoff(m, B, R) == -10);
  CHECK(payoff(m, C, C) == 5);
  CHECK(payoff(m, C, R) == 0);
  CHECK(payoff(m, R, R) == 0);
  CHECK(m.symmetric());
}

TEST_CASE("climbing game steps") {
  ClimbingGame g;
  const auto obs = g.reset(17);
  REQUIRE(obs.size() == 2);
  CHECK(obs[0].size() == 1);
  CHECK(obs[0][0] == 1.0);

  auto r = g.step(0, 0);
  CHECK(r.reward == 11);
  CHECK(r.done);
  REQUIRE(r.info.outcome);
  CHECK(*r.info.outcome == OutcomePair{A, A});

  g.reset(1);
  r = g.step(1, 2);
  CHECK(r.reward == 6);
  CHECK(r.done);
  g.reset(1);
  CHECK(g.step(3, 3).reward == 0);
  g.reset(1);
  CHECK_THROWS(g.step(4, 0));
}

TEST_CASE("rescue reset is seeded and respects spacing") {
  const RescueConfig cfg;
  CHECK(rescue_reset(cfg, 5) == rescue_reset(cfg, 5));
  CHECK_FALSE(rescue_reset(cfg, 5) == rescue_reset(cfg, 6));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const RescueState s = rescue_reset(cfg, seed);
    std::vector<Vec2> all(s.rescuer_pos.begin(), s.rescuer_pos.end());
    all.insert(all.end(), s.animal_pos.begin(), s.animal_pos.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].cwiseAbs().maxCoeff() <= cfg.arena);
      for (std::size_t j = i + 1; j < all.size(); ++j) CHECK((all[i] - all[j]).norm() >= cfg.min_separation);
    }
  }
}

TEST_CASE("joint capture pays the diagonal") {
  const RescueConfig cfg;
  const PayoffMatrix m = PayoffMatrix::rescue_table();
  RescueState s = quiet_state();
  s.rescuer_pos = {s.animal_pos[0] + Vec2(0.03, 0.0), s.animal_pos[0] - Vec2(0.03, 0.0)};
  const auto r = rescue_step(s, cfg, m, kIdle);
  CHECK(r.done);
  CHECK(r.reward == 11);
  CHECK(*r.info.outcome == OutcomePair{A, A});
  CHECK(r.info.touches[0] >= 2);
  CHECK_THROWS_AS(rescue_step(s, cfg, m, kIdle), std::logic_error);
}

TEST_CASE("unassisted hold expires onto the road") {
  RescueConfig cfg;
  cfg.horizon = 100;
  const PayoffMatrix m = PayoffMatrix::rescue_table();
  RescueState s = quiet_state();
  s.rescuer_pos[0] = s.animal_pos[0] + Vec2(0.03, 0.0);
  auto r = rescue_step(s, cfg, m, kIdle);
  REQUIRE(s.hold_owner);
  CHECK(s.hold_owner->animal == 0);
  CHECK(s.hold_owner->rescuer == 0);
  const Vec2 frozen = s.animal_pos[0];
  int steps = 1;
  while (!r.done) {
    r = rescue_step(s, cfg, m, {Vec2(-1.0, 0.0), Vec2::Zero()});
    CHECK(s.animal_pos[0] == frozen);
    ++steps;
  }
  CHECK(steps == 1 + cfg.t_hold);
  CHECK(r.reward == -30);
  CHECK(*r.info.outcome == OutcomePair{A, R});
}

TEST_CASE("idle episode runs to the horizon with no reward") {
  RescueEnv env;
  auto obs = env.reset(3);
  double total = 0.0;
  std::size_t steps = 0;
  JointStepResult r;
  do {
    r = env.step({AgentAction::continuous(Vec::Zero(2)), AgentAction::continuous(Vec::Zero(2))});
    ++steps;
    if (!r.done) CHECK(r.reward == 0.0);
    total += r.reward;
  } while (!r.done);
  CHECK(steps <= env.horizon());
  if (*r.info.outcome == OutcomePair{R, R}) {
    CHECK(steps == env.horizon());
    CHECK(total == 0.0);
  }
}

TEST_CASE("terminal reward always equals the payoff of the outcome") {
  RescueEnv env;
  const PayoffMatrix m = PayoffMatrix::rescue_table();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t ep = 0; ep < 200; ++ep) {
    env.reset(ep);
    JointStepResult r;
    std::size_t steps = 0;
    std::array<int, kAnimals> last{};
    do {
      Vec a0(2), a1(2);
      a0 << u(rng), u(rng);
      a1 << u(rng), u(rng);
      r = env.step({AgentAction::continuous(a0), AgentAction::continuous(a1)});
      ++steps;
      for (std::size_t j = 0; j < kAnimals; ++j) CHECK(r.info.touches[j] >= last[j]);
      last = r.info.touches;
      if (!r.done) CHECK(r.reward == 0.0);
    } while (!r.done);
    CHECK(steps <= env.horizon());
    REQUIRE(r.info.outcome);
    CHECK(r.reward == payoff(m, r.info.outcome->first, r.info.outcome->second));
  }
}

TEST_CASE("physics is a pure function of state and actions") {
  const RescueConfig cfg;
  const PayoffMatrix m = PayoffMatrix::rescue_table();
  RescueState a = rescue_reset(cfg, 77);
  RescueState b = a;
  const std::array<Vec2, kRescuers> act{Vec2(0.3, -0.8), Vec2(-1.0, 0.2)};
  for (int i = 0; i < 10 && !a.episode_done; ++i) {
    rescue_step(a, cfg, m, act);
    rescue_step(b, cfg, m, act);
    CHECK(a == b);
  }
}

TEST_CASE("scripted flee direction and wall repulsion") {
  const RescueConfig cfg;
  RescueState s = quiet_state();
  s.animal_pos[0] = Vec2(0.0, 0.0);
  s.rescuer_pos = {Vec2(-0.5, 0.0), Vec2(-0.6, 0.5)};
  const Vec2 away = animal_policy(s, cfg, 0);
  CHECK(away.x() == doctest::Approx(1.0));
  CHECK(away.y() == doctest::Approx(0.0));

  s.animal_pos[0] = Vec2(0.95, 0.0);
  s.rescuer_pos = {Vec2(0.45, 0.0), Vec2(-0.6, 0.5)};
  const Vec2 wall = animal_policy(s, cfg, 0);
  // inner edge 0.9, depth 0.05 into a 0.1 margin: push 1 - 0.5
  CHECK(wall.x() == doctest::Approx(0.5));
  CHECK(wall.norm() <= 1.0 + 1e-12);
}

TEST_CASE("observation layout") {
  const RescueConfig cfg;
  CHECK(kRescueObsDim == 22);
  RescueState s = quiet_state();
  s.rescuer_pos = {Vec2(-0.4, 0.1), Vec2(0.4, 0.1)};
  s.animal_pos = {Vec2(0.0, 0.6), Vec2(-0.7, -0.5), Vec2(0.7, -0.5)};
  const Vec o0 = rescue_observe(s, cfg, 0);
  const Vec o1 = rescue_observe(s, cfg, 1);
  REQUIRE(o0.size() == 22);
  CHECK(o0.allFinite());
  // Mirror symmetry across x = 0: agent 1 sees agent 0's view reflected,
  // with animals b and c swapped.
  CHECK(o1[0] == doctest::Approx(-o0[0]));
  CHECK(o1[4] == doctest::Approx(-o0[4]));
  CHECK(o1[6] == doctest::Approx(-o0[6]));
  CHECK(o1[7] == doctest::Approx(o0[7]));
  CHECK(o1[8] == doctest::Approx(-o0[10]));
  CHECK(o1[9] == doctest::Approx(o0[11]));
  for (Eigen::Index k = 4; k < 6 + 6; ++k) CHECK(std::abs(o0[k]) <= 2.0);
  CHECK_THROWS(rescue_observe(s, cfg, 2));
}

TEST_CASE("touch counts") {
  RescueEnv env;
  env.reset(9);
  CHECK(touch_counter(env.state()) == std::array<int, kAnimals>{0, 0, 0});
}

TEST_CASE("learned animal weights must have the right shape") {
  testing::TempDir dir("animal");
  std::mt19937_64 rng(1);
  save_weights(Mlp({8, 16, 2}, OutputHead::tanh, rng), dir / "ok.weights");
  save_weights(Mlp({5, 2}, OutputHead::tanh, rng), dir / "bad.weights");
  RescueConfig cfg;
  cfg.animal_weights = (dir / "ok.weights").string();
  RescueEnv env(cfg);
  env.reset(1);
  CHECK_NOTHROW(env.step({AgentAction::continuous(Vec::Zero(2)), AgentAction::continuous(Vec::Zero(2))}));
  cfg.animal_weights = (dir / "bad.weights").string();
  CHECK_THROWS_AS(RescueEnv{cfg}, std::runtime_error);
}

}  // TEST_SUITE
