#include "igasil/gasil.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace igasil;

namespace {

Transition pair_of(const Vec& obs, const Vec& action, double reward = 0.0) {
  Transition t;
  t.obs = obs;
  t.action = action;
  t.next_obs = obs;
  t.reward = reward;
  t.done = true;
  return t;
}

std::vector<Transition> gaussian_pairs(std::size_t n, double centre, std::mt19937_64& rng, std::size_t obs_dim = 3,
                                       std::size_t act_dim = 2) {
  std::vector<Transition> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vec o = testing::random_vec(obs_dim, rng, 0.5).array() + centre;
    Vec a = testing::random_vec(act_dim, rng, 0.5).array() + centre;
    out.push_back(pair_of(o, a));
  }
  return out;
}

double mean_probability(const Discriminator& d, const std::vector<Transition>& batch) {
  double s = 0.0;
  for (const auto& t : batch) s += d.probability(t.obs, t.action);
  return s / static_cast<double>(batch.size());
}

void zero_parameters(Mlp& net) {
  for (auto& w : net.mutable_weights()) w.setZero();
  for (auto& b : net.mutable_biases()) b.setZero();
}

}  // namespace

TEST_SUITE("gasil") {

TEST_CASE("imitation reward from probability") {
  CHECK(imitation_reward_from_probability(0.5) == 0.0);
  CHECK(imitation_reward_from_probability(0.9) == doctest::Approx(2.1972245773362196).epsilon(1e-14));
  CHECK(imitation_reward_from_probability(1.0) == kSigmoidLogitClamp);
  CHECK(imitation_reward_from_probability(0.0) == -kSigmoidLogitClamp);
  CHECK_THROWS_AS(imitation_reward_from_probability(1.5), std::domain_error);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> k(1, (1ull << 53) - 1);
  for (int i = 0; i < 1000; ++i) {
    const double p = static_cast<double>(k(rng)) / 9007199254740992.0;
    CHECK(std::abs(imitation_reward_from_probability(p) + imitation_reward_from_probability(1.0 - p)) <= 1e-12);
  }
}

TEST_CASE("reward forms follow the discriminator logit") {
  std::mt19937_64 rng(2);
  Discriminator d(1, 1, {}, rng);
  zero_parameters(d.net);
  d.net.mutable_biases().back()(0) = std::log(3.0);  // D = 0.75
  const Vec o = Vec::Ones(1), a = Vec::Zero(1);
  CHECK(d.probability(o, a) == doctest::Approx(0.75));
  CHECK(imitation_reward(d, o, a) == doctest::Approx(std::log(0.75) - std::log(0.25)));
  CHECK(imitation_reward(d, o, a, RewardForm::pos_biased) == doctest::Approx(-std::log(0.25)));
  CHECK(imitation_reward(d, o, a, RewardForm::neg_biased) == doctest::Approx(std::log(0.75)));
}

TEST_CASE("reward shaping arithmetic") {
  std::mt19937_64 rng(3);
  Discriminator d(1, 1, {}, rng);
  zero_parameters(d.net);
  d.net.mutable_biases().back()(0) = 2.0;  // r_imit = 2
  const std::vector<Transition> batch{pair_of(Vec::Ones(1), Vec::Zero(1), 0.0),
                                      pair_of(Vec::Ones(1), Vec::Ones(1), -15.0)};
  const auto shaped = shape_rewards(batch, d, 0.5);
  CHECK(shaped[0].reward == doctest::Approx(1.0));
  CHECK(shaped[1].reward == doctest::Approx(-14.0));
  CHECK(batch[0].reward == 0.0);

  const auto same = shape_rewards(batch, d, 0.0);
  CHECK(same[0].reward == 0.0);
  CHECK(same[1].reward == -15.0);

  d.net.mutable_biases().back()(0) = 0.0;  // D = 0.5
  CHECK(shape_rewards(batch, d, 1.0)[1].reward == -15.0);
}

TEST_CASE("uninformed discriminator objective") {
  std::mt19937_64 rng(4);
  Discriminator d(3, 2, {}, rng);
  zero_parameters(d.net);
  const auto e = gaussian_pairs(5, 1.0, rng), p = gaussian_pairs(7, -1.0, rng);
  CHECK(discriminator_objective(d, e, p).value == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("objective gradient matches central differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Discriminator d(3, 2, {.hidden = 8}, rng);
    const auto e = gaussian_pairs(4, 0.5, rng), p = gaussian_pairs(4, -0.5, rng);
    const auto obj = discriminator_objective(d, e, p);
    std::size_t skipped = 0;
    const double err =
        testing::worst_fd_error(d.net, obj.grad.flat(), [&] { return discriminator_objective(d, e, p).value; }, &skipped);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("separable classes") {
  std::mt19937_64 rng(6);
  Discriminator d(3, 2, {}, rng);
  const auto e = gaussian_pairs(64, 2.0, rng), p = gaussian_pairs(64, -2.0, rng);
  const auto r = disc_update(d, e, p, 500);
  REQUIRE(r);
  CHECK(r->objective_after > r->objective_before);
  CHECK(mean_probability(d, e) > 0.9);
  CHECK(mean_probability(d, p) < 0.1);
}

TEST_CASE("matching distributions stay near one half") {
  std::mt19937_64 rng(7);
  Discriminator d(3, 2, {}, rng);
  for (int k = 0; k < 200; ++k) {
    const auto e = gaussian_pairs(64, 0.0, rng), p = gaussian_pairs(64, 0.0, rng);
    disc_update(d, e, p, 1);
  }
  const auto e = gaussian_pairs(256, 0.0, rng), p = gaussian_pairs(256, 0.0, rng);
  CHECK(discriminator_objective(d, e, p).value >= 2.0 * std::log(0.5) - 0.2);
  const auto held_out = gaussian_pairs(256, 0.0, rng);
  CHECK(std::abs(mean_probability(d, held_out) - 0.5) <= 0.15);
}

TEST_CASE("discriminator update preconditions") {
  std::mt19937_64 rng(8);
  Discriminator d(3, 2, {}, rng);
  const auto e = gaussian_pairs(4, 0.0, rng), p = gaussian_pairs(5, 0.0, rng);
  CHECK_FALSE(disc_update(d, {}, p, 1).has_value());
  CHECK_FALSE(disc_update(d, e, {}, 1).has_value());
  CHECK_THROWS_AS(disc_update(d, e, p, 1), std::invalid_argument);
  CHECK_THROWS_AS(d.encode(Vec::Ones(2), Vec::Ones(2)), std::invalid_argument);
}

TEST_CASE("running observation statistics") {
  RunningNorm n(2);
  std::mt19937_64 rng(9);
  Mat all = testing::random_mat(100, 2, rng, 3.0);
  n.update(all.topRows(30));
  n.update(all.bottomRows(70));
  const Vec mean = all.colwise().mean().transpose();
  CHECK((n.mean - mean).cwiseAbs().maxCoeff() <= 1e-12);
  const Vec var = (all.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / 100.0;
  CHECK((n.stddev() - var.cwiseSqrt()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(RunningNorm(3).stddev() == Vec::Ones(3));
}

TEST_CASE("imitation weight schedule") {
  ImitationSchedule s{0.1, 1.0005, 1.0};
  CHECK(lambda_at(s, 0) == 0.1);
  std::size_t first_at_max = 0;
  while (lambda_at(s, first_at_max) < s.lambda_max) ++first_at_max;
  // 0.1 * 1.0005^n = 1  <=>  n = ln 10 / ln 1.0005 = 4606.3...
  CHECK(first_at_max == static_cast<std::size_t>(std::ceil(std::log(10.0) / std::log(1.0005))));
  CHECK(lambda_at(s, 100000) == 1.0);

  ImitationSchedule flat{0.3, 1.0, 1.0};
  for (std::size_t n : {0, 1, 10, 100000}) CHECK(lambda_at(flat, n) == 0.3);

  const double g = ImitationSchedule::growth_to_reach(0.1, 1.0, 6000.0);
  CHECK(0.1 * std::pow(g, 6000.0) == doctest::Approx(1.0));
  CHECK(ImitationSchedule::growth_to_reach(0.0, 1.0, 10.0) == 1.0);
}

}  // TEST_SUITE
