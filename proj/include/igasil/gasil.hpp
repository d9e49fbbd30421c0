#pragma once

// Adversarial self-imitation: a per-agent discriminator separating the
// agent's own best experiences from its ordinary replay, and the reward
// reshaping r' = r + lambda * r_imit it feeds back into the learner.

#include "igasil/buffers.hpp"
#include "igasil/net.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace igasil {

/// Running mean / variance of observations (Chan et al. parallel update).
struct RunningNorm {
  double count = 0.0;
  Vec mean;
  Vec m2;

  explicit RunningNorm(std::size_t dim = 0);
  void update(const Mat& batch);
  Vec stddev() const;
  Mat normalize(const Mat& batch) const;
};

enum class RewardForm { unbiased, pos_biased, neg_biased };
std::string_view to_string(RewardForm f);
RewardForm parse_reward_form(std::string_view s);

struct DiscriminatorConfig {
  std::size_t hidden = 64;
  double learning_rate = 1e-3;
  double grad_clip = 10.0;
};

class Discriminator {
 public:
  Discriminator(std::size_t obs_dim, std::size_t action_dim, const DiscriminatorConfig& cfg,
                std::mt19937_64& rng);

  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  /// Network input rows: normalized obs followed by the raw action encoding.
  Mat encode(const std::vector<Transition>& batch) const;
  Mat encode(const Vec& obs, const Vec& action) const;
  /// Clamped logits, one per row of an encoded batch.
  Vec logits(const Mat& encoded) const;
  double probability(const Vec& obs, const Vec& action) const;

  Mlp net;
  AdamState adam;
  RunningNorm obs_norm;
  double grad_clip;

 private:
  std::size_t obs_dim_;
  std::size_t action_dim_;
};

/// log D - log(1 - D) for a probability, clamped to the logit limit.
double imitation_reward_from_probability(double p);

/// r_imit(s, a): the clamped discriminator logit for the unbiased form.
double imitation_reward(const Discriminator& d, const Vec& obs, const Vec& action,
                        RewardForm form = RewardForm::unbiased);
Vec imitation_rewards(const Discriminator& d, const std::vector<Transition>& batch,
                      RewardForm form = RewardForm::unbiased);

/// Copies of `batch` with reward replaced by r + lambda * r_imit(s, a).
std::vector<Transition> shape_rewards(const std::vector<Transition>& batch, const Discriminator& d,
                                      double lambda_imit, RewardForm form = RewardForm::unbiased);

struct DiscObjective {
  double value;    // mean log D(expert) + mean log(1 - D(policy))
  Gradients grad;  // gradient of `value` (ascent direction)
};

/// Objective and its parameter gradient on fixed batches; no state changes.
DiscObjective discriminator_objective(const Discriminator& d, const std::vector<Transition>& expert,
                                      const std::vector<Transition>& policy);

struct DiscUpdateResult {
  double objective_before;
  double objective_after;
};

/// `steps` ascent steps on the objective. nullopt ("not ready") if either
/// batch is empty; throws std::invalid_argument on unequal batch sizes.
std::optional<DiscUpdateResult> disc_update(Discriminator& d, const std::vector<Transition>& expert,
                                            const std::vector<Transition>& policy, std::size_t steps);

struct ImitationSchedule {
  double lambda0 = 0.1;
  double growth = 1.0;
  double lambda_max = 1.0;

  /// Growth rate that reaches lambda_max after `episodes` episodes.
  static double growth_to_reach(double lambda0, double lambda_max, double episodes);
};

/// min(lambda0 * growth^n, lambda_max).
double lambda_at(const ImitationSchedule& s, std::size_t n);

void save_discriminator(const Discriminator& d, const std::filesystem::path& weights,
                        const std::filesystem::path& norm);

}  // namespace igasil
