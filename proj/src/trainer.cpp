#include "igasil/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace igasil {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string outcome_label(const std::optional<OutcomePair>& o, bool first) {
  if (!o) return "none";
  return std::string(to_string(first ? o->first : o->second));
}

std::vector<Transition> sample_from(std::span<const Transition> pool, std::size_t batch, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(pool[pick(rng)]);
  return out;
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t agent) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(agent)};
  return std::mt19937_64(seq);
}

Learner make_learner(const TrainConfig& cfg, const Environment& env, std::size_t agent_index) {
  auto init = make_stream(cfg.seed, Stream::init, agent_index);
  const auto space = env.action_space();
  Learner l{make_agent(space, env.obs_dim(), cfg.agent, init),
            RingReplay(cfg.ring_capacity),
            SubCurriculumReplay(cfg.scer_capacity),
            std::nullopt,
            make_stream(cfg.seed, Stream::act, agent_index),
            make_stream(cfg.seed, Stream::rl, agent_index),
            make_stream(cfg.seed, Stream::disc, agent_index),
            make_stream(cfg.seed, Stream::scer, agent_index)};
  if (uses_discriminator(cfg.variant)) {
    auto disc_init = make_stream(cfg.seed, Stream::disc_init, agent_index);
    l.disc.emplace(env.obs_dim(), space.dim, cfg.disc, disc_init);
  }
  return l;
}

EpisodeResult run_episode(Environment& env, std::span<const Actor> actors, ActMode mode, std::uint64_t env_seed,
                          double gamma) {
  const std::size_t n = env.n_agents();
  if (actors.size() != n)
    throw std::invalid_argument("environment " + std::string(env.id()) + " needs " + std::to_string(n) + " agents, got " +
                                std::to_string(actors.size()));
  std::vector<Vec> obs = env.reset(env_seed);
  std::vector<std::vector<Transition>> steps(n);
  EpisodeResult res;
  const std::size_t limit = env.horizon();
  while (true) {
    std::vector<AgentAction> actions;
    std::vector<std::optional<double>> logps;
    actions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ActResult r = mode == ActMode::random ? actors[i].agent->random_action(*actors[i].rng)
                                            : actors[i].agent->act(obs[i], mode == ActMode::explore, *actors[i].rng);
      actions.push_back(std::move(r.action));
      logps.push_back(r.behavior_logp);
    }
    JointStepResult step = env.step(actions);
    for (std::size_t i = 0; i < n; ++i) {
      Transition t;
      t.obs = std::move(obs[i]);
      t.action = actions[i].values;
      t.action_index = actions[i].index;
      t.reward = step.reward;
      t.next_obs = step.observations[i];
      t.done = step.done;
      t.behavior_logp = logps[i];
      steps[i].push_back(std::move(t));
    }
    res.shared_return += step.reward;
    res.length += 1;
    obs = std::move(step.observations);
    if (step.done) {
      res.outcome = step.info.outcome;
      res.touches = step.info.touches;
      break;
    }
    if (res.length >= limit) throw std::logic_error("environment ran past its horizon without terminating");
  }
  res.trajectories.reserve(n);
  for (auto& s : steps) res.trajectories.emplace_back(std::move(s), gamma);
  return res;
}

void store_episode(Learner& learner, const Trajectory& traj, std::size_t n_subs) {
  for (const auto& t : traj.transitions()) learner.ring.push(t);
  learner.scer.insert(traj, n_subs, learner.scer_rng);
}

IterationStats train_iteration(Learner& learner, const IterationContext& ctx) {
  IterationStats stats;
  const bool on_policy = is_on_policy(ctx.variant);
  if (on_policy && (!ctx.current_episode || ctx.current_episode->empty())) return stats;
  if (!on_policy && learner.ring.size() < ctx.batch_size) return stats;

  auto draw = [&](std::mt19937_64& rng) {
    if (on_policy) return sample_from(ctx.current_episode->transitions(), ctx.batch_size, rng);
    return learner.ring.sample_uniform(ctx.batch_size, rng);
  };

  const bool imitate = uses_discriminator(ctx.variant) && learner.disc;
  if (imitate) {
    std::vector<Transition> policy = draw(learner.disc_rng);
    if (auto expert = learner.scer.sample_pairs(ctx.batch_size, learner.disc_rng)) {
      if (auto r = disc_update(*learner.disc, *expert, policy, ctx.disc_steps)) stats.disc_loss = -r->objective_after;
    }
  }
  std::vector<Transition> batch = draw(learner.rl_rng);
  if (imitate) batch = shape_rewards(batch, *learner.disc, ctx.lambda_imit, ctx.reward_form);
  stats.agent = learner.agent->update(batch);
  stats.ran = true;
  return stats;
}

EvalResult evaluate(std::span<const Agent* const> agents, Environment& env, std::size_t episodes, std::uint64_t seed) {
  EvalResult res;
  auto rng = make_stream(seed, Stream::eval);
  std::vector<Actor> actors;
  for (const Agent* a : agents) actors.push_back({a, &rng});
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto ep = run_episode(env, actors, ActMode::greedy, rng(), 1.0);
    total += ep.shared_return;
    if (ep.outcome)
      res.histogram[static_cast<std::size_t>(ep.outcome->first)][static_cast<std::size_t>(ep.outcome->second)] += 1;
  }
  res.episodes = episodes;
  if (episodes > 0) res.mean_return = total / static_cast<double>(episodes);
  return res;
}

MetricsRow summarize_window(std::span<const EpisodeLog> window) {
  MetricsRow row;
  if (window.empty()) return row;
  const double n = static_cast<double>(window.size());
  row.window_end_episode = window.back().episode + 1;
  row.max_return = window.front().shared_return;
  double disc_sum = 0.0;
  std::size_t disc_n = 0;
  for (const auto& e : window) {
    row.mean_return += e.shared_return;
    row.max_return = std::max(row.max_return, e.shared_return);
    for (std::size_t k = 0; k < 3; ++k) row.touch[k] += e.touches[k];
    if (e.outcome && e.outcome->first == e.outcome->second && e.outcome->first != Outcome::on_the_road) {
      if (e.outcome->first == Outcome::catch_a) row.outcome_aa += 1;
      if (e.outcome->first == Outcome::catch_b) row.outcome_bb += 1;
      if (e.outcome->first == Outcome::catch_c) row.outcome_cc += 1;
    } else {
      row.outcome_other += 1;
    }
    if (e.disc_loss) {
      disc_sum += *e.disc_loss;
      ++disc_n;
    }
  }
  row.mean_return /= n;
  for (auto& t : row.touch) t /= n;
  row.outcome_aa /= n;
  row.outcome_bb /= n;
  row.outcome_cc /= n;
  row.outcome_other /= n;
  const auto& last = window.back();
  row.lambda_imit = last.lambda_imit;
  row.disc_loss = disc_n ? disc_sum / static_cast<double>(disc_n) : 0.0;
  double mean_sum = 0.0;
  std::size_t mean_n = 0;
  bool any_max = false;
  for (std::size_t i = 0; i < last.scer_mean.size(); ++i) {
    if (last.scer_mean[i]) {
      mean_sum += *last.scer_mean[i];
      ++mean_n;
    }
    if (last.scer_max[i]) {
      row.scer_max = any_max ? std::max(row.scer_max, *last.scer_max[i]) : *last.scer_max[i];
      any_max = true;
    }
  }
  row.scer_mean = mean_n ? mean_sum / static_cast<double>(mean_n) : 0.0;
  return row;
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.window_end_episode << ',' << num(r.mean_return) << ',' << num(r.max_return) << ',' << num(r.scer_mean) << ','
      << num(r.scer_max) << ',' << num(r.touch[0]) << ',' << num(r.touch[1]) << ',' << num(r.touch[2]) << ','
      << num(r.outcome_aa) << ',' << num(r.outcome_bb) << ',' << num(r.outcome_cc) << ',' << num(r.outcome_other) << ','
      << num(r.lambda_imit) << ',' << num(r.disc_loss) << '\n';
}

void write_episode_row(std::ostream& out, const EpisodeLog& e) {
  out << e.episode << ',' << num(e.shared_return) << ',' << outcome_label(e.outcome, true) << ','
      << outcome_label(e.outcome, false) << ',' << e.touches[0] << ',' << e.touches[1] << ',' << e.touches[2] << ','
      << e.length << ',' << num(e.lambda_imit) << '\n';
}

// ------------------------------------------------------------------ Trainer

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)), env_(make_environment(cfg_)), schedule_(cfg_.schedule()),
      env_rng_(make_stream(cfg_.seed, Stream::env)) {
  validate(cfg_);
  for (std::size_t i = 0; i < env_->n_agents(); ++i) learners_.push_back(make_learner(cfg_, *env_, i));
}

double Trainer::lambda_now() const {
  return uses_discriminator(cfg_.variant) ? lambda_at(schedule_, episode_) : 0.0;
}

EpisodeLog Trainer::step() {
  if (finished()) throw std::logic_error("Trainer::step past the configured episode budget");
  const std::size_t n = episode_;
  const bool warm = n < cfg_.warmup_episodes;
  const double progress = cfg_.episodes ? static_cast<double>(n) / static_cast<double>(cfg_.episodes) : 0.0;
  std::vector<Actor> actors;
  for (auto& l : learners_) {
    l.agent->set_progress(progress);
    actors.push_back({l.agent.get(), &l.act_rng});
  }
  const auto env_seed = env_rng_();
  EpisodeResult ep = run_episode(*env_, actors, warm ? ActMode::random : ActMode::explore, env_seed, cfg_.agent.gamma);

  const std::size_t n_subs = scer_subtrajectories(cfg_.variant, cfg_.scer_subtrajectories);
  for (std::size_t i = 0; i < learners_.size(); ++i) store_episode(learners_[i], ep.trajectories[i], n_subs);

  const double lambda = lambda_now();
  double disc_sum = 0.0;
  std::size_t disc_n = 0;
  if (!warm) {
    const std::size_t updates = cfg_.resolved_updates_per_episode();
    for (std::size_t u = 0; u < updates; ++u) {
      for (std::size_t i = 0; i < learners_.size(); ++i) {
        const IterationContext ctx{cfg_.variant, cfg_.batch_size,   cfg_.disc_steps,
                                   lambda,       cfg_.reward_form, &ep.trajectories[i]};
        const auto stats = train_iteration(learners_[i], ctx);
        if (stats.disc_loss) {
          disc_sum += *stats.disc_loss;
          ++disc_n;
        }
      }
    }
  }

  EpisodeLog log{n, ep.shared_return, ep.outcome, ep.touches, ep.length, lambda, std::nullopt, {}, {}};
  if (disc_n) log.disc_loss = disc_sum / static_cast<double>(disc_n);
  for (const auto& l : learners_) {
    log.scer_mean.push_back(l.scer.mean_return());
    log.scer_max.push_back(l.scer.max_return());
  }
  ++episode_;
  return log;
}

// ----------------------------------------------------------------- campaign

void save_checkpoint(const std::vector<Learner>& learners, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream roles(dir / "roles.txt");
  if (!roles) throw std::runtime_error("cannot write checkpoint in " + dir.string());
  for (std::size_t i = 0; i < learners.size(); ++i) {
    const std::string prefix = "agent" + std::to_string(i);
    for (const auto& [role, net] : learners[i].agent->networks()) {
      const std::string file = prefix + "." + role + ".weights";
      save_weights(*net, dir / file);
      roles << prefix << ' ' << role << ' ' << file << '\n';
    }
    if (learners[i].disc) {
      save_discriminator(*learners[i].disc, dir / (prefix + ".discriminator.weights"),
                         dir / (prefix + ".discriminator.norm"));
      roles << prefix << " discriminator " << prefix << ".discriminator.weights\n";
    }
  }
}

LoadedRun load_run(const fs::path& run_dir) {
  LoadedRun run;
  apply_config_file(run.cfg, run_dir / "config.txt");
  validate(run.cfg);
  const auto env = make_environment(run.cfg);
  const fs::path ckpt = run_dir / "checkpoints" / "final";
  std::ifstream roles(ckpt / "roles.txt");
  if (!roles) throw std::runtime_error("no final checkpoint in " + run_dir.string());
  for (std::size_t i = 0; i < env->n_agents(); ++i) {
    auto init = make_stream(run.cfg.seed, Stream::init, i);
    run.agents.push_back(make_agent(env->action_space(), env->obs_dim(), run.cfg.agent, init));
  }
  std::string agent_name, role, file;
  while (roles >> agent_name >> role >> file) {
    if (role == "discriminator") continue;
    if (agent_name.rfind("agent", 0) != 0) throw std::runtime_error("malformed roles.txt entry '" + agent_name + "'");
    const std::size_t idx = std::stoul(agent_name.substr(5));
    if (idx >= run.agents.size()) throw std::runtime_error("roles.txt names a missing agent " + agent_name);
    run.agents[idx]->load_network(role, load_weights(ckpt / file));
  }
  return run;
}

std::optional<double> correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

CampaignResult run_campaign(const TrainConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  fs::create_directories(out_dir);
  fs::remove(out_dir / "manifest.txt");
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
    return f;
  };
  {
    auto c = open("config.txt");
    c << serialize(cfg);
  }
  auto metrics = open("metrics.csv");
  auto episodes = open("episodes.csv");
  metrics << kMetricsHeader << '\n';
  episodes << kEpisodesHeader << '\n';

  Trainer trainer(cfg);
  CampaignResult result{out_dir, {}, {}, std::nullopt};
  std::vector<EpisodeLog> window;
  std::vector<double> scer0, scer1;
  auto flush_window = [&] {
    const MetricsRow row = summarize_window(window);
    write_metrics_row(metrics, row);
    result.rows.push_back(row);
    const auto& last = window.back();
    if (last.scer_mean.size() == 2 && last.scer_mean[0] && last.scer_mean[1]) {
      scer0.push_back(*last.scer_mean[0]);
      scer1.push_back(*last.scer_mean[1]);
    }
    window.clear();
  };
  while (!trainer.finished()) {
    EpisodeLog log = trainer.step();
    write_episode_row(episodes, log);
    result.returns.push_back(log.shared_return);
    window.push_back(std::move(log));
    if (window.size() == cfg.metrics_window) flush_window();
    if (cfg.checkpoint_interval > 0 && trainer.episode() % cfg.checkpoint_interval == 0)
      save_checkpoint(trainer.learners(), out_dir / "checkpoints" / ("ep" + std::to_string(trainer.episode())));
  }
  if (!window.empty()) flush_window();
  metrics.flush();
  episodes.flush();
  if (!metrics || !episodes) throw std::runtime_error("failed writing metrics in " + out_dir.string());
  save_checkpoint(trainer.learners(), out_dir / "checkpoints" / "final");

  result.scer_correlation = correlation(scer0, scer1);
  auto manifest = open("manifest.txt");
  manifest << "version = " << kVersion << '\n'
           << "seed = " << cfg.seed << '\n'
           << "env = " << cfg.env << '\n'
           << "variant = " << to_string(cfg.variant) << '\n'
           << "episodes = " << cfg.episodes << '\n'
           << "scer_return_correlation = " << (result.scer_correlation ? num(*result.scer_correlation) : "na") << '\n'
           << "final_mean_return = " << (result.rows.empty() ? "na" : num(result.rows.back().mean_return)) << '\n';
  if (!manifest) throw std::runtime_error("failed writing manifest in " + out_dir.string());
  return result;
}

}  // namespace igasil
