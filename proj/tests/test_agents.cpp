#include "igasil/agents.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace igasil;
using testing::random_vec;

namespace {

Transition discrete_step(const Vec& obs, int action, std::size_t n, double reward, const Vec& next, bool done) {
  Transition t;
  t.obs = obs;
  t.action = AgentAction::discrete(action, n).values;
  t.action_index = action;
  t.reward = reward;
  t.next_obs = next;
  t.done = done;
  return t;
}

Transition continuous_step(const Vec& obs, const Vec& action, double reward, const Vec& next, bool done) {
  Transition t;
  t.obs = obs;
  t.action = action;
  t.reward = reward;
  t.next_obs = next;
  t.done = done;
  return t;
}

std::vector<Transition> discrete_batch(std::size_t n, std::size_t obs_dim, std::size_t n_actions,
                                       std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n_actions) - 1);
  std::normal_distribution<double> r(0.0, 2.0);
  std::vector<Transition> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(discrete_step(random_vec(obs_dim, rng), pick(rng), n_actions, r(rng), random_vec(obs_dim, rng),
                                i % 2 == 0));
  return out;
}

std::vector<Transition> continuous_batch(std::size_t n, std::size_t obs_dim, std::size_t act_dim,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> r(0.0, 2.0);
  std::vector<Transition> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vec a(static_cast<Eigen::Index>(act_dim));
    for (auto& x : a) x = u(rng);
    out.push_back(continuous_step(random_vec(obs_dim, rng), a, r(rng), random_vec(obs_dim, rng), i % 3 == 0));
  }
  return out;
}

AgentConfig small_config() {
  AgentConfig c;
  c.hidden = 8;
  return c;
}

}  // namespace

TEST_SUITE("agents") {

TEST_CASE("variant names") {
  for (auto v : {AgentVariant::igasil, AgentVariant::iac, AgentVariant::iac_per, AgentVariant::iddpg,
                 AgentVariant::igasil_onpolicy})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS(parse_variant("maddpg"));
  CHECK_FALSE(uses_discriminator(AgentVariant::iac));
  CHECK_FALSE(uses_discriminator(AgentVariant::iddpg));
  CHECK(uses_discriminator(AgentVariant::iac_per));
  CHECK(scer_subtrajectories(AgentVariant::iac_per, 4) == 0);
  CHECK(scer_subtrajectories(AgentVariant::igasil, 4) == 4);
  CHECK(is_on_policy(AgentVariant::igasil_onpolicy));
  CHECK_FALSE(is_on_policy(AgentVariant::igasil));
}

TEST_CASE("soft update") {
  Mlp online({1, 1}, OutputHead::linear), target({1, 1}, OutputHead::linear);
  online.mutable_weights()[0](0, 0) = 2.0;
  online.mutable_biases()[0](0) = -4.0;
  Mlp t0 = target;
  soft_update(t0, online, 0.0);
  CHECK(t0 == target);
  Mlp half = target;
  soft_update(half, online, 0.5);
  CHECK(half.weights()[0](0, 0) == 1.0);
  CHECK(half.biases()[0](0) == -2.0);
  Mlp full = target;
  soft_update(full, online, 1.0);
  CHECK(full == online);
  CHECK_THROWS(soft_update(full, online, 1.5));
  Mlp other({2, 1}, OutputHead::linear);
  CHECK_THROWS(soft_update(other, online, 0.5));
}

TEST_CASE("soft update stays on the segment") {
  std::mt19937_64 rng(1);
  Mlp a({3, 4, 2}, OutputHead::tanh, rng), b({3, 4, 2}, OutputHead::tanh, rng);
  Mlp t = a;
  soft_update(t, b, 0.37);
  for (std::size_t i = 0; i < t.parameter_count(); ++i) {
    CHECK(t.parameter(i) >= std::min(a.parameter(i), b.parameter(i)));
    CHECK(t.parameter(i) <= std::max(a.parameter(i), b.parameter(i)));
  }
}

TEST_CASE("uniform policy acting") {
  std::mt19937_64 rng(2);
  A2cAgent agent(1, 4, small_config(), rng);
  for (auto& w : agent.actor.mutable_weights()) w.setZero();
  for (auto& b : agent.actor.mutable_biases()) b.setZero();
  const Vec obs = Vec::Ones(1);
  const Vec logp = agent.log_policy(obs);
  for (double l : logp) CHECK(l == doctest::Approx(-std::log(4.0)));

  std::array<int, 4> freq{};
  for (int i = 0; i < 10000; ++i) {
    const auto r = agent.act(obs, true, rng);
    CHECK(r.behavior_logp.value() == doctest::Approx(-std::log(4.0)));
    CHECK(r.action.values.sum() == 1.0);
    freq[static_cast<std::size_t>(r.action.index)]++;
  }
  const double sigma = std::sqrt(10000 * 0.25 * 0.75);
  for (int f : freq) CHECK(std::abs(f - 2500) <= 5 * sigma);

  const auto batch = std::vector<Transition>{discrete_step(obs, 0, 4, 0.0, obs, true)};
  CHECK(a2c_policy_objective(agent, batch).entropy == doctest::Approx(1.3862943611198906));
}

TEST_CASE("acting is deterministic in the rng state") {
  std::mt19937_64 rng(3);
  A2cAgent a2c(3, 4, small_config(), rng);
  DdpgAgent ddpg(3, 2, small_config(), rng);
  const Vec obs = random_vec(3, rng);
  std::mt19937_64 r1(99), r2(99);
  CHECK(a2c.act(obs, true, r1).action.index == a2c.act(obs, true, r2).action.index);
  CHECK(ddpg.act(obs, true, r1).action.values == ddpg.act(obs, true, r2).action.values);
  CHECK(ddpg.random_action(r1).action.values == ddpg.random_action(r2).action.values);
}

TEST_CASE("greedy DDPG action is the actor output") {
  std::mt19937_64 rng(4);
  DdpgAgent agent(5, 2, small_config(), rng);
  for (int i = 0; i < 20; ++i) {
    const Vec obs = random_vec(5, rng, 3.0);
    const auto r = agent.act(obs, false, rng);
    CHECK(r.action.values == agent.actor.forward_one(obs));
    CHECK(r.action.values.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(agent.act(obs, true, rng).action.values.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("exploration noise anneals") {
  std::mt19937_64 rng(5);
  AgentConfig c = small_config();
  c.noise_start = 0.2;
  c.noise_end = 0.05;
  DdpgAgent agent(2, 2, c, rng);
  CHECK(agent.noise_scale() == 0.2);
  agent.set_progress(0.5);
  CHECK(agent.noise_scale() == doctest::Approx(0.125));
  agent.set_progress(7.0);
  CHECK(agent.noise_scale() == doctest::Approx(0.05));
}

TEST_CASE("critic targets") {
  std::mt19937_64 rng(6);
  AgentConfig c = small_config();
  c.gamma = 0.0;
  A2cAgent a2c(3, 4, c, rng);
  DdpgAgent ddpg(3, 2, c, rng);
  auto db = discrete_batch(6, 3, 4, rng);
  auto cb = continuous_batch(6, 3, 2, rng);
  const Vec ya = a2c_targets(a2c, db), yd = ddpg_targets(ddpg, cb);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(ya[static_cast<Eigen::Index>(i)] == db[i].reward);
    CHECK(yd[static_cast<Eigen::Index>(i)] == cb[i].reward);
  }

  c.gamma = 0.95;
  A2cAgent discounted(3, 4, c, rng);
  DdpgAgent discounted_ddpg(3, 2, c, rng);
  for (auto& t : db) t.done = true;
  for (auto& t : cb) t.done = true;
  const Vec before = a2c_targets(discounted, db), before_d = ddpg_targets(discounted_ddpg, cb);
  for (auto& t : db) t.next_obs = random_vec(3, rng, 5.0);
  for (auto& t : cb) t.next_obs = random_vec(3, rng, 5.0);
  CHECK(a2c_targets(discounted, db) == before);
  CHECK(ddpg_targets(discounted_ddpg, cb) == before_d);
}

TEST_CASE("A2C critic gradient matches central differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    A2cAgent agent(3, 4, small_config(), rng);
    const auto batch = discrete_batch(3, 3, 4, rng);
    const auto lg = a2c_critic_loss(agent, batch);
    // Targets are held fixed; the loss is differentiated through V(s) only.
    const Vec y = a2c_targets(agent, batch);
    Mat obs(3, 3);
    for (int i = 0; i < 3; ++i) obs.row(i) = batch[static_cast<std::size_t>(i)].obs.transpose();
    auto loss = [&] { return (agent.critic.forward(obs).col(0) - y).squaredNorm() / 3.0; };
    CHECK(lg.value == doctest::Approx(loss()));
    CHECK(testing::worst_fd_error(agent.critic, lg.grad.flat(), loss) <= 1e-4);
  }
}

TEST_CASE("A2C policy gradient matches central differences") {
  std::mt19937_64 rng(8);
  for (bool is : {false, true}) {
    for (int trial = 0; trial < 20; ++trial) {
      AgentConfig c = small_config();
      c.entropy_coef = 0.05;
      c.importance_sampling = is;
      A2cAgent agent(3, 4, c, rng);
      auto batch = discrete_batch(5, 3, 4, rng);
      // Importance weights are held constant in the gradient; a tiny behaviour
      // probability keeps them on the clip where that is exact.
      for (auto& t : batch) t.behavior_logp = -50.0;
      const auto obj = a2c_policy_objective(agent, batch);
      // Advantages come from the critic, which the actor perturbation leaves alone.
      auto f = [&] { return a2c_policy_objective(agent, batch).value; };
      CHECK(testing::worst_fd_error(agent.actor, obj.grad.flat(), f) <= 1e-4);
    }
  }
}

TEST_CASE("zero advantage leaves only the entropy gradient") {
  std::mt19937_64 rng(9);
  AgentConfig c = small_config();
  c.gamma = 0.0;
  c.entropy_coef = 0.1;
  A2cAgent agent(2, 3, c, rng);
  auto batch = discrete_batch(4, 2, 3, rng);
  for (auto& t : batch) {
    t.reward = agent.critic.forward_one(t.obs)[0];
    t.done = true;
  }
  const auto with_entropy = a2c_policy_objective(agent, batch);
  agent.cfg.entropy_coef = 0.0;
  const auto without = a2c_policy_objective(agent, batch);
  CHECK(std::sqrt(without.grad.squared_norm()) <= 1e-12);
  CHECK(with_entropy.value == doctest::Approx(0.1 * with_entropy.entropy));
}

TEST_CASE("one small step moves the taken action with the advantage sign") {
  for (double reward : {5.0, -5.0}) {
    std::mt19937_64 rng(10);
    AgentConfig c = small_config();
    c.entropy_coef = 0.0;
    c.actor_lr = 1e-4;
    c.gamma = 0.0;
    A2cAgent agent(1, 4, c, rng);
    const Vec obs = Vec::Ones(1);
    const double baseline = agent.critic.forward_one(obs)[0];
    const std::vector<Transition> batch{discrete_step(obs, 2, 4, baseline + reward, obs, true)};
    const double before = agent.log_policy(obs)[2];
    a2c_update(agent, batch);
    const double after = agent.log_policy(obs)[2];
    CAPTURE(reward);
    CHECK((after > before) == (reward > 0));
  }
}

TEST_CASE("DDPG critic gradient matches central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    DdpgAgent agent(4, 2, small_config(), rng);
    const auto batch = continuous_batch(3, 4, 2, rng);
    const auto lg = ddpg_critic_loss(agent, batch);
    auto f = [&] { return ddpg_critic_loss(agent, batch).value; };
    CHECK(testing::worst_fd_error(agent.critic, lg.grad.flat(), f) <= 1e-4);
  }
}

TEST_CASE("DDPG actor gradient matches central differences") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    DdpgAgent agent(4, 2, small_config(), rng);
    const auto batch = continuous_batch(3, 4, 2, rng);
    const auto lg = ddpg_actor_objective(agent, batch);
    auto f = [&] { return ddpg_actor_objective(agent, batch).value; };
    CHECK(testing::worst_fd_error(agent.actor, lg.grad.flat(), f) <= 1e-4);
  }
}

TEST_CASE("DDPG update moves targets toward the online nets") {
  std::mt19937_64 rng(13);
  AgentConfig c = small_config();
  c.tau = 0.5;
  DdpgAgent agent(4, 2, c, rng);
  const auto batch = continuous_batch(16, 4, 2, rng);
  const Mlp old_target = agent.target_critic;
  ddpg_update(agent, batch);
  for (std::size_t i = 0; i < old_target.parameter_count(); ++i)
    CHECK(agent.target_critic.parameter(i) ==
          doctest::Approx(0.5 * old_target.parameter(i) + 0.5 * agent.critic.parameter(i)));
}

TEST_CASE("non-finite batches are rejected") {
  std::mt19937_64 rng(14);
  A2cAgent agent(3, 4, small_config(), rng);
  auto batch = discrete_batch(4, 3, 4, rng);
  batch[1].reward = std::numeric_limits<double>::infinity();
  const double before = agent.checksum();
  CHECK_THROWS_AS(agent.update(batch), std::domain_error);
  CHECK(agent.checksum() == before);
}

TEST_CASE("network loading checks shapes") {
  std::mt19937_64 rng(15);
  A2cAgent agent(3, 4, small_config(), rng);
  CHECK_THROWS(agent.load_network("actor", Mlp({3, 5, 4}, OutputHead::softmax)));
  CHECK_THROWS(agent.load_network("actor", Mlp({3, 8, 8, 4}, OutputHead::tanh)));
  CHECK_THROWS(agent.load_network("pilot", Mlp({3, 8, 8, 4}, OutputHead::softmax)));
  Mlp replacement({3, 8, 8, 4}, OutputHead::softmax, rng);
  agent.load_network("actor", replacement);
  CHECK(agent.actor == replacement);
}

TEST_CASE("agent factory follows the action space") {
  std::mt19937_64 rng(16);
  auto d = make_agent({ActionKind::discrete, 4}, 1, small_config(), rng);
  auto c = make_agent({ActionKind::continuous, 2}, 22, small_config(), rng);
  CHECK(dynamic_cast<A2cAgent*>(d.get()) != nullptr);
  CHECK(dynamic_cast<DdpgAgent*>(c.get()) != nullptr);
  CHECK(c->networks().size() == 4);
}

}  // TEST_SUITE
