#include "igasil/selftest.hpp"

#include "igasil/agents.hpp"
#include "igasil/buffers.hpp"
#include "igasil/gasil.hpp"
#include "igasil/net.hpp"
#include "igasil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

namespace igasil {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

/// Largest relative error between `grad` and central differences of `f`.
double fd_error(Mlp& net, const std::function<double()>& f, const Gradients& grad) {
  const auto analytic = grad.flat();
  double worst = 0.0;
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    const double saved = net.parameter(i);
    net.parameter(i) = saved + kFdStep;
    const double up = f();
    net.parameter(i) = saved - kFdStep;
    const double down = f();
    net.parameter(i) = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * kFdStep)));
  }
  return worst;
}

bool near_kink(const Mlp& net, const Mat& x) {
  GradTape tape;
  net.forward(x, &tape);
  for (std::size_t l = 0; l + 1 < tape.pre.size(); ++l)
    if ((tape.pre[l].array().abs() < 1e-3).any()) return true;
  return false;
}

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

std::vector<Transition> random_batch(std::size_t n, std::size_t obs_dim, std::size_t n_actions, bool discrete,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n_actions) - 1);
  std::vector<Transition> out;
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.obs = random_mat(static_cast<Eigen::Index>(obs_dim), 1, rng).col(0);
    t.next_obs = random_mat(static_cast<Eigen::Index>(obs_dim), 1, rng).col(0);
    if (discrete) {
      t.action_index = pick(rng);
      t.action = AgentAction::discrete(t.action_index, n_actions).values;
    } else {
      t.action = random_mat(static_cast<Eigen::Index>(n_actions), 1, rng).col(0);
    }
    t.reward = u(rng);
    t.done = i % 3 == 0;
    out.push_back(std::move(t));
  }
  return out;
}

struct Recorder {
  std::vector<SelftestCheck> checks;
  void add(std::string group, std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(group), std::move(name), ok, std::move(detail)});
  }
  template <class F>
  void guard(const std::string& group, const std::string& name, F&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      add(group, name, false, std::string("exception: ") + e.what());
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

void check_payoff(Recorder& rec, const PayoffMatrix& m) {
  const double expected[4][4] = {{11, -30, 0, -30}, {-30, 7, 6, -10}, {0, 6, 5, 0}, {-30, -10, 0, 0}};
  int wrong = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (m.values[i][j] != expected[i][j]) ++wrong;
  rec.add("payoff-table", "entries match the rescue payoff table", wrong == 0, std::to_string(wrong) + " wrong entries");
  rec.add("payoff-table", "symmetric", m.symmetric());
  ClimbingGame game(m);
  game.reset(0);
  rec.add("payoff-table", "climbing (a,a) pays 11", game.step(0, 0).reward == 11.0);
}

void check_net(Recorder& rec) {
  rec.guard("net-gradients", "backward matches finite differences", [&] {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    int done = 0;
    const OutputHead heads[] = {OutputHead::tanh, OutputHead::softmax, OutputHead::sigmoid, OutputHead::linear};
    while (done < 40) {
      Mlp net({4, 8, 8, 3}, heads[done % 4], rng);
      const Mat x = random_mat(3, 4, rng);
      if (near_kink(net, x)) continue;
      const Mat w = random_mat(3, 3, rng);
      GradTape tape;
      net.forward(x, &tape);
      const Gradients g = net.backward(tape, w);
      worst = std::max(worst, fd_error(net, [&] { return net.forward(x).cwiseProduct(w).sum(); }, g));
      ++done;
    }
    rec.add("net-gradients", "backward matches finite differences", worst <= kFdTolerance, "max rel err " + fmt(worst));
  });
  rec.guard("net-gradients", "softmax rows sum to one", [&] {
    std::mt19937_64 rng(12);
    Mlp net({3, 8, 8, 5}, OutputHead::softmax, rng);
    const Mat y = net.forward(random_mat(50, 3, rng) * 30.0);
    const double err = (y.rowwise().sum().array() - 1.0).abs().maxCoeff();
    rec.add("net-gradients", "softmax rows sum to one", err <= 1e-12 && (y.array() >= 0.0).all(), "max err " + fmt(err));
  });
}

void check_adam(Recorder& rec) {
  rec.guard("adam", "first step matches the bias-corrected update", [&] {
    Mlp net({1, 1}, OutputHead::linear);
    AdamState st(net, 1e-3);
    Gradients g = Gradients::zeros_like(net);
    g.weights[0](0, 0) = 1.0;
    adam_step(net, g, st);
    const double delta = net.weights()[0](0, 0);
    const double expected = -1e-3 * 1.0 / (1.0 + 1e-8);
    rec.add("adam", "first step matches the bias-corrected update", std::abs(delta - expected) < 1e-15,
            "delta " + fmt(delta));
  });
}

void check_weights(Recorder& rec) {
  rec.guard("weights-io", "save/load round trip", [&] {
    std::mt19937_64 rng(13);
    Mlp net({5, 16, 16, 2}, OutputHead::tanh, rng);
    std::stringstream ss;
    save_weights(net, ss);
    const Mlp back = load_weights(ss);
    const Mat x = random_mat(20, 5, rng);
    rec.add("weights-io", "save/load round trip", back == net && back.forward(x) == net.forward(x));
  });
  rec.guard("weights-io", "truncated file rejected", [&] {
    std::mt19937_64 rng(14);
    Mlp net({3, 4, 4, 1}, OutputHead::linear, rng);
    std::stringstream ss;
    save_weights(net, ss);
    std::string text = ss.str();
    std::stringstream cut(text.substr(0, text.size() / 2));
    bool threw = false;
    try {
      load_weights(cut);
    } catch (const std::runtime_error&) {
      threw = true;
    }
    rec.add("weights-io", "truncated file rejected", threw);
  });
}

void check_scer(Recorder& rec) {
  rec.guard("scer-oracle", "top-k matches sort oracle", [&] {
    std::mt19937_64 rng(15);
    std::uniform_int_distribution<int> value(-20, 20);
    int mismatches = 0;
    bool heap_ok = true;
    for (int trial = 0; trial < 10; ++trial) {
      SubCurriculumReplay buf(64);
      std::vector<std::pair<double, std::uint64_t>> offered;
      for (std::uint64_t s = 0; s < 1000; ++s) {
        Transition t;
        t.obs = Vec::Zero(1);
        t.next_obs = Vec::Zero(1);
        t.action = Vec::Zero(1);
        t.reward = value(rng);
        t.done = true;
        buf.offer(Trajectory({t}, 0.9));
        offered.emplace_back(t.reward, s);
        heap_ok = heap_ok && buf.heap_property_holds();
      }
      std::sort(offered.begin(), offered.end(), [](auto& a, auto& b) {
        return a.first != b.first ? a.first > b.first : a.second > b.second;
      });
      offered.resize(64);
      std::vector<std::pair<double, std::uint64_t>> stored;
      for (const auto& e : buf.entries()) stored.emplace_back(e.priority, e.seq);
      std::sort(stored.begin(), stored.end());
      std::sort(offered.begin(), offered.end());
      if (stored != offered) ++mismatches;
    }
    rec.add("scer-oracle", "top-k matches sort oracle", mismatches == 0, std::to_string(mismatches) + " mismatches");
    rec.add("scer-oracle", "heap property after every offer", heap_ok);
  });
  rec.guard("scer-oracle", "discounted return", [&] {
    const std::vector<double> r{0, 1, 3, 1, 0, 0, -20};
    rec.add("scer-oracle", "discounted return", discounted_return(r, 1.0) == -15.0);
  });
}

void check_imitation(Recorder& rec) {
  bool ok = imitation_reward_from_probability(0.5) == 0.0;
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<std::uint64_t> bits(1, (std::uint64_t{1} << 53) - 1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = std::ldexp(static_cast<double>(bits(rng)), -53);
    worst = std::max(worst, std::abs(imitation_reward_from_probability(p) + imitation_reward_from_probability(1.0 - p)));
  }
  rec.add("imitation-reward", "zero at one half", ok);
  rec.add("imitation-reward", "antisymmetric", worst <= 1e-12, "max " + fmt(worst));
  bool mono = true;
  double prev = imitation_reward_from_probability(0.0);
  for (int i = 1; i <= 10000; ++i) {
    const double v = imitation_reward_from_probability(i / 10000.0);
    mono = mono && v >= prev;
    prev = v;
  }
  rec.add("imitation-reward", "monotone in D", mono);
}

void check_learner_gradients(Recorder& rec) {
  rec.guard("learner-gradients", "discriminator objective", [&] {
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      Discriminator d(3, 2, {8, 1e-3, 10.0}, rng);
      const auto e = random_batch(4, 3, 2, false, rng);
      const auto p = random_batch(4, 3, 2, false, rng);
      const auto obj = discriminator_objective(d, e, p);
      worst = std::max(worst, fd_error(d.net, [&] { return discriminator_objective(d, e, p).value; }, obj.grad));
    }
    rec.add("learner-gradients", "discriminator objective", worst <= kFdTolerance, "max rel err " + fmt(worst));
  });
  rec.guard("learner-gradients", "A2C policy objective", [&] {
    std::mt19937_64 rng(18);
    AgentConfig cfg;
    cfg.hidden = 8;
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      A2cAgent agent(3, 4, cfg, rng);
      const auto b = random_batch(5, 3, 4, true, rng);
      const auto obj = a2c_policy_objective(agent, b);
      worst = std::max(worst, fd_error(agent.actor, [&] { return a2c_policy_objective(agent, b).value; }, obj.grad));
    }
    rec.add("learner-gradients", "A2C policy objective", worst <= kFdTolerance, "max rel err " + fmt(worst));
  });
  rec.guard("learner-gradients", "DDPG critic loss", [&] {
    std::mt19937_64 rng(19);
    AgentConfig cfg;
    cfg.hidden = 8;
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      DdpgAgent agent(3, 2, cfg, rng);
      const auto b = random_batch(3, 3, 2, false, rng);
      const auto loss = ddpg_critic_loss(agent, b);
      worst = std::max(worst, fd_error(agent.critic, [&] { return ddpg_critic_loss(agent, b).value; }, loss.grad));
    }
    rec.add("learner-gradients", "DDPG critic loss", worst <= kFdTolerance, "max rel err " + fmt(worst));
  });
}

void check_env(Recorder& rec) {
  rec.guard("rescue-env", "reset determinism and spacing", [&] {
    RescueConfig cfg;
    bool same = rescue_reset(cfg, 5) == rescue_reset(cfg, 5);
    bool spaced = true;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto s = rescue_reset(cfg, seed);
      std::vector<Vec2> pts(s.rescuer_pos.begin(), s.rescuer_pos.end());
      pts.insert(pts.end(), s.animal_pos.begin(), s.animal_pos.end());
      for (std::size_t i = 0; i < pts.size(); ++i) {
        spaced = spaced && pts[i].cwiseAbs().maxCoeff() <= cfg.arena;
        for (std::size_t j = i + 1; j < pts.size(); ++j) spaced = spaced && (pts[i] - pts[j]).norm() >= cfg.min_separation;
      }
    }
    rec.add("rescue-env", "reset is deterministic", same);
    rec.add("rescue-env", "spawn positions in bounds and separated", spaced);
  });
  rec.guard("rescue-env", "idle episode pays nothing", [&] {
    RescueEnv env;
    env.reset(3);
    const AgentAction idle = AgentAction::continuous(Vec::Zero(2));
    bool sparse = true;
    std::size_t steps = 0;
    while (true) {
      auto r = env.step({idle, idle});
      ++steps;
      if (!r.done && r.reward != 0.0) sparse = false;
      if (r.done) break;
    }
    rec.add("rescue-env", "episode ends within the horizon", steps <= env.horizon());
    rec.add("rescue-env", "reward only at termination", sparse);
  });
}

void check_determinism(Recorder& rec) {
  rec.guard("determinism", "identical seeds give identical runs", [&] {
    TrainConfig cfg;
    cfg.episodes = 300;
    cfg.warmup_episodes = 100;
    cfg.agent.hidden = 16;
    cfg.disc.hidden = 16;
    auto run = [&] {
      Trainer t(cfg);
      std::ostringstream out;
      while (!t.finished()) write_episode_row(out, t.step());
      for (const auto& l : t.learners()) out << l.agent->checksum() << ' ' << l.disc->net.checksum() << '\n';
      return out.str();
    };
    rec.add("determinism", "identical seeds give identical runs", run() == run());
  });
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestHooks& hooks) {
  Recorder rec;
  check_payoff(rec, hooks.payoff.value_or(PayoffMatrix::rescue_table()));
  check_net(rec);
  check_adam(rec);
  check_weights(rec);
  check_scer(rec);
  check_imitation(rec);
  check_learner_gradients(rec);
  check_env(rec);
  check_determinism(rec);
  return rec.checks;
}

void print_selftest_report(std::ostream& out, const std::vector<SelftestCheck>& checks) {
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.group.size() + c.name.size() + 3);
  for (const auto& c : checks) {
    const std::string label = c.group + " / " + c.name;
    out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << label;
    if (!c.detail.empty()) out << "  " << c.detail;
    out << '\n';
  }
  const auto failed = std::count_if(checks.begin(), checks.end(), [](const auto& c) { return !c.passed; });
  out << checks.size() - static_cast<std::size_t>(failed) << '/' << checks.size() << " checks passed\n";
}

bool all_passed(const std::vector<SelftestCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

}  // namespace igasil
