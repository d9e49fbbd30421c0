#pragma once

// The outer training loop: every agent samples its own trajectory, stores it
// in its ring replay and sub-curriculum replay, trains its discriminator and
// updates its policy on reshaped rewards. Agents never see each other's data.

#include "igasil/agents.hpp"
#include "igasil/buffers.hpp"
#include "igasil/config.hpp"
#include "igasil/envs.hpp"
#include "igasil/gasil.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace igasil {

inline constexpr std::string_view kVersion = "igasil 1.0.0";

inline constexpr char kMetricsHeader[] =
    "window_end_episode,mean_return,max_return,scer_mean,scer_max,touch_a,touch_b,touch_c,"
    "outcome_aa,outcome_bb,outcome_cc,outcome_other,lambda_imit,disc_loss";
inline constexpr char kEpisodesHeader[] = "episode,return,outcome_0,outcome_1,touch_a,touch_b,touch_c,length,lambda_imit";

/// Independent random streams. Keeping them apart is what lets a run with a
/// zero imitation weight replay the plain baseline exactly.
enum class Stream : std::uint64_t { init = 1, act = 2, rl = 3, disc = 4, scer = 5, env = 6, disc_init = 7, eval = 8 };
std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t agent = 0);

/// Everything one agent owns.
struct Learner {
  std::unique_ptr<Agent> agent;
  RingReplay ring;
  SubCurriculumReplay scer;
  std::optional<Discriminator> disc;
  std::mt19937_64 act_rng;
  std::mt19937_64 rl_rng;
  std::mt19937_64 disc_rng;
  std::mt19937_64 scer_rng;
};

Learner make_learner(const TrainConfig& cfg, const Environment& env, std::size_t agent_index);

enum class ActMode { random, explore, greedy };

struct Actor {
  const Agent* agent;
  std::mt19937_64* rng;
};

struct EpisodeResult {
  std::vector<Trajectory> trajectories;  // one per agent, own observations only
  double shared_return = 0.0;            // undiscounted
  std::optional<OutcomePair> outcome;
  std::array<int, 3> touches{};
  std::size_t length = 0;
};

EpisodeResult run_episode(Environment& env, std::span<const Actor> actors, ActMode mode, std::uint64_t env_seed,
                          double gamma);

/// Ring replay push of every transition, then the sub-curriculum insert.
void store_episode(Learner& learner, const Trajectory& traj, std::size_t n_subs);

struct IterationContext {
  AgentVariant variant;
  std::size_t batch_size;
  std::size_t disc_steps;
  double lambda_imit;
  RewardForm reward_form;
  const Trajectory* current_episode;  // on-policy sampling source
};

struct IterationStats {
  bool ran = false;
  std::optional<double> disc_loss;  // binary cross-entropy after the update
  UpdateStats agent;
};

/// One body of the training loop for a single agent.
IterationStats train_iteration(Learner& learner, const IterationContext& ctx);

struct EvalResult {
  std::size_t episodes = 0;
  std::optional<double> mean_return;  // nullopt: no data
  std::array<std::array<std::size_t, kOutcomeCount>, kOutcomeCount> histogram{};
};

/// Greedy episodes; no buffer writes and no learning.
EvalResult evaluate(std::span<const Agent* const> agents, Environment& env, std::size_t episodes, std::uint64_t seed);

struct EpisodeLog {
  std::size_t episode;
  double shared_return;
  std::optional<OutcomePair> outcome;
  std::array<int, 3> touches;
  std::size_t length;
  double lambda_imit;
  std::optional<double> disc_loss;  // mean over this episode's updates and agents
  std::vector<std::optional<double>> scer_mean;
  std::vector<std::optional<double>> scer_max;
};

struct MetricsRow {
  std::size_t window_end_episode = 0;
  double mean_return = 0.0;
  double max_return = 0.0;
  double scer_mean = 0.0;
  double scer_max = 0.0;
  std::array<double, 3> touch{};
  double outcome_aa = 0.0;
  double outcome_bb = 0.0;
  double outcome_cc = 0.0;
  double outcome_other = 0.0;
  double lambda_imit = 0.0;
  double disc_loss = 0.0;
};

/// Aggregates one window of episode logs.
MetricsRow summarize_window(std::span<const EpisodeLog> window);

void write_metrics_row(std::ostream& out, const MetricsRow& row);
void write_episode_row(std::ostream& out, const EpisodeLog& log);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  /// Runs one episode and its learning iterations.
  EpisodeLog step();
  std::size_t episode() const { return episode_; }
  bool finished() const { return episode_ >= cfg_.episodes; }
  double lambda_now() const;

  const TrainConfig& config() const { return cfg_; }
  Environment& env() { return *env_; }
  std::vector<Learner>& learners() { return learners_; }
  const std::vector<Learner>& learners() const { return learners_; }

 private:
  TrainConfig cfg_;
  std::unique_ptr<Environment> env_;
  std::vector<Learner> learners_;
  ImitationSchedule schedule_;
  std::mt19937_64 env_rng_;
  std::size_t episode_ = 0;
};

struct CampaignResult {
  std::filesystem::path dir;
  std::vector<MetricsRow> rows;
  std::vector<double> returns;
  std::optional<double> scer_correlation;
};

/// Full run into `out_dir`: config.txt, metrics.csv, episodes.csv,
/// checkpoints/ and manifest.txt (written last, marks completion).
CampaignResult run_campaign(const TrainConfig& cfg, const std::filesystem::path& out_dir);

void save_checkpoint(const std::vector<Learner>& learners, const std::filesystem::path& dir);

struct LoadedRun {
  TrainConfig cfg;
  std::vector<std::unique_ptr<Agent>> agents;
};
/// Rebuilds agents from a run directory's config and final checkpoint.
LoadedRun load_run(const std::filesystem::path& run_dir);

/// Pearson correlation; nullopt with fewer than two points or zero variance.
std::optional<double> correlation(std::span<const double> x, std::span<const double> y);

}  // namespace igasil
