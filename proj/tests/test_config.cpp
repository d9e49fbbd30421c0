#include "igasil/config.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace igasil;

TEST_SUITE("config") {

TEST_CASE("every key round trips through its text form") {
  const TrainConfig defaults;
  std::set<std::string> names;
  for (const auto& k : config_keys()) {
    CAPTURE(k.name);
    CHECK(names.insert(k.name).second);
    CHECK_FALSE(k.doc.empty());
    TrainConfig c;
    k.set(c, k.get(defaults));
    CHECK(serialize(c) == serialize(defaults));
  }
  CHECK(names.count("gasil.lambda0"));
  CHECK(names.count("env.rescue.t_hold"));
  CHECK(names.count("trainer.metrics_window"));
}

TEST_CASE("defaults") {
  const TrainConfig c;
  CHECK(c.env == "climbing");
  CHECK(c.variant == AgentVariant::igasil);
  CHECK(c.episodes == 20000);
  CHECK(c.lambda0 == 0.1);
  CHECK(c.scer_capacity == 64);
  CHECK(c.rescue.t_hold == 8);
  CHECK(c.rescue.horizon == 50);
  CHECK(c.resolved_updates_per_episode() == 1);
  TrainConfig r;
  r.env = "rescue";
  CHECK(r.resolved_updates_per_episode() == 4);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("automatic growth reaches the cap at the ramp fraction") {
  TrainConfig c;
  c.episodes = 1000;
  c.lambda_ramp = 0.5;
  const auto s = c.schedule();
  CHECK(lambda_at(s, 0) == c.lambda0);
  CHECK(lambda_at(s, 500) == doctest::Approx(c.lambda_max));
  c.growth = 1.0005;
  CHECK(c.schedule().growth == 1.0005);
}

TEST_CASE("file text with comments") {
  TrainConfig c;
  apply_config_text(c,
                    "# climbing preset\n"
                    "env = climbing\n"
                    "   gasil.lambda0=0.5   # inline\n"
                    "\n"
                    "agent.importance_sampling = true\n");
  CHECK(c.lambda0 == 0.5);
  CHECK(c.agent.importance_sampling);
}

TEST_CASE("errors name their origin") {
  TrainConfig c;
  CHECK_THROWS_WITH_AS(apply_config_text(c, "episodes = 10\nwibble = 3\n", "preset.conf"),
                       doctest::Contains("preset.conf:2"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "episodes = many\n"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "episodes 10\n"), ConfigError);
  CHECK_THROWS_AS(set_value(c, "episodes", "-3"), ConfigError);
  CHECK_THROWS_AS(set_value(c, "gasil.lambda0", "0.1x"), ConfigError);
  CHECK_THROWS_AS(set_value(c, "agent.importance_sampling", "maybe"), ConfigError);
  CHECK_THROWS_AS(set_value(c, "variant", "maddpg"), ConfigError);
  CHECK_THROWS_WITH_AS(set_value(c, "env", "mars"), doctest::Contains("climbing, rescue"), ConfigError);
}

TEST_CASE("serialized config reloads to the same config") {
  TrainConfig c;
  c.env = "rescue";
  c.variant = AgentVariant::iddpg;
  c.seed = 17;
  c.lambda0 = 0.123456789012345;
  c.rescue.animal_weights = "animals.weights";
  TrainConfig back;
  apply_config_text(back, serialize(c));
  CHECK(serialize(back) == serialize(c));
  CHECK(back.lambda0 == c.lambda0);
  CHECK(get_value(back, "seed") == "17");
}

TEST_CASE("config files") {
  testing::TempDir dir("cfg");
  {
    std::ofstream(dir / "a.conf") << "seed = 9\n";
  }
  TrainConfig c;
  apply_config_file(c, dir / "a.conf");
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(apply_config_file(c, dir / "missing.conf"), ConfigError);
}

TEST_CASE("cross-field validation") {
  TrainConfig c;
  c.variant = AgentVariant::iddpg;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.env = "rescue";
  CHECK_NOTHROW(validate(c));
  c.variant = AgentVariant::iac;
  CHECK_THROWS_AS(validate(c), ConfigError);

  TrainConfig g;
  g.growth = 0.5;
  CHECK_THROWS_AS(validate(g), ConfigError);
  TrainConfig w;
  w.metrics_window = 0;
  CHECK_THROWS_AS(validate(w), ConfigError);
  TrainConfig t;
  t.agent.tau = 2.0;
  CHECK_THROWS_AS(validate(t), ConfigError);
}

TEST_CASE("environment factory") {
  TrainConfig c;
  CHECK(make_environment(c)->id() == "climbing");
  c.env = "rescue";
  CHECK(make_environment(c)->obs_dim() == 22);
}

}  // TEST_SUITE
