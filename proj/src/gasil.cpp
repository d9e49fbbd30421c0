#include "igasil/gasil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace igasil {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp_logit(double z) { return std::clamp(z, -kSigmoidLogitClamp, kSigmoidLogitClamp); }

double reward_from_logit(double z, RewardForm form) {
  switch (form) {
    case RewardForm::unbiased: return z;
    case RewardForm::pos_biased: return softplus(z);    // -log(1 - D)
    case RewardForm::neg_biased: return -softplus(-z);  // log D
  }
  return z;
}

}  // namespace

RunningNorm::RunningNorm(std::size_t dim)
    : mean(Vec::Zero(static_cast<Eigen::Index>(dim))), m2(Vec::Zero(static_cast<Eigen::Index>(dim))) {}

void RunningNorm::update(const Mat& batch) {
  if (batch.rows() == 0) return;
  const double nb = static_cast<double>(batch.rows());
  const Vec bmean = batch.colwise().mean().transpose();
  const Vec bm2 = (batch.rowwise() - bmean.transpose()).colwise().squaredNorm().transpose();
  const double total = count + nb;
  const Vec delta = bmean - mean;
  mean += delta * (nb / total);
  m2 += bm2 + delta.cwiseProduct(delta) * (count * nb / total);
  count = total;
}

Vec RunningNorm::stddev() const {
  if (count < 2.0) return Vec::Ones(mean.size());
  return (m2 / count).cwiseSqrt().cwiseMax(1e-4);
}

Mat RunningNorm::normalize(const Mat& batch) const {
  const Vec sd = stddev();
  Mat out = batch.rowwise() - mean.transpose();
  return out.array().rowwise() / sd.transpose().array();
}

std::string_view to_string(RewardForm f) {
  switch (f) {
    case RewardForm::unbiased: return "unbiased";
    case RewardForm::pos_biased: return "pos_biased";
    case RewardForm::neg_biased: return "neg_biased";
  }
  return "?";
}

RewardForm parse_reward_form(std::string_view s) {
  if (s == "unbiased") return RewardForm::unbiased;
  if (s == "pos_biased") return RewardForm::pos_biased;
  if (s == "neg_biased") return RewardForm::neg_biased;
  throw std::invalid_argument("unknown reward form '" + std::string(s) + "'");
}

// ------------------------------------------------------------ Discriminator

Discriminator::Discriminator(std::size_t obs_dim, std::size_t action_dim, const DiscriminatorConfig& cfg,
                             std::mt19937_64& rng)
    : net({obs_dim + action_dim, cfg.hidden, cfg.hidden, 1}, OutputHead::sigmoid, rng),
      adam(net, cfg.learning_rate),
      obs_norm(obs_dim),
      grad_clip(cfg.grad_clip),
      obs_dim_(obs_dim),
      action_dim_(action_dim) {}

Mat Discriminator::encode(const std::vector<Transition>& batch) const {
  Mat obs(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(obs_dim_));
  Mat act(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(action_dim_));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    if (static_cast<std::size_t>(t.obs.size()) != obs_dim_ || static_cast<std::size_t>(t.action.size()) != action_dim_)
      throw std::invalid_argument("Discriminator::encode: transition dimension mismatch");
    obs.row(static_cast<Eigen::Index>(i)) = t.obs.transpose();
    act.row(static_cast<Eigen::Index>(i)) = t.action.transpose();
  }
  return hcat(obs_norm.normalize(obs), act);
}

Mat Discriminator::encode(const Vec& obs, const Vec& action) const {
  Transition t;
  t.obs = obs;
  t.action = action;
  return encode(std::vector<Transition>{t});
}

Vec Discriminator::logits(const Mat& encoded) const {
  GradTape tape;
  net.forward(encoded, &tape);
  return tape.pre.back().col(0).unaryExpr([](double z) { return clamp_logit(z); });
}

double Discriminator::probability(const Vec& obs, const Vec& action) const {
  return sigmoid(logits(encode(obs, action))[0]);
}

// ------------------------------------------------------------------ rewards

double imitation_reward_from_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("imitation reward needs a probability in [0, 1]");
  return clamp_logit(std::log(p) - std::log1p(-p));
}

double imitation_reward(const Discriminator& d, const Vec& obs, const Vec& action, RewardForm form) {
  return reward_from_logit(d.logits(d.encode(obs, action))[0], form);
}

Vec imitation_rewards(const Discriminator& d, const std::vector<Transition>& batch, RewardForm form) {
  if (batch.empty()) return Vec();
  Vec z = d.logits(d.encode(batch));
  return z.unaryExpr([form](double x) { return reward_from_logit(x, form); });
}

std::vector<Transition> shape_rewards(const std::vector<Transition>& batch, const Discriminator& d,
                                      double lambda_imit, RewardForm form) {
  if (lambda_imit < 0.0) throw std::invalid_argument("shape_rewards: lambda_imit must be non-negative");
  std::vector<Transition> out = batch;
  if (batch.empty()) return out;
  const Vec r_imit = imitation_rewards(d, batch, form);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].reward = batch[i].reward + lambda_imit * r_imit[static_cast<Eigen::Index>(i)];
  return out;
}

// ------------------------------------------------------------------ training

namespace {

DiscObjective evaluate_objective(const Discriminator& d, const std::vector<Transition>& expert,
                                 const std::vector<Transition>& policy, bool with_grad) {
  if (expert.empty() || policy.empty()) throw std::invalid_argument("discriminator_objective: empty batch");
  const Mat xe = d.encode(expert);
  const Mat xp = d.encode(policy);
  Mat x(xe.rows() + xp.rows(), xe.cols());
  x << xe, xp;
  const auto ne = static_cast<Eigen::Index>(expert.size());
  const auto np = static_cast<Eigen::Index>(policy.size());
  GradTape tape;
  d.net.forward(x, &tape);
  const Mat& raw = tape.pre.back();
  Mat dz(ne + np, 1);
  double sum_e = 0.0, sum_p = 0.0;
  for (Eigen::Index i = 0; i < ne + np; ++i) {
    const double z = clamp_logit(raw(i, 0));
    const double s = sigmoid(z);
    if (i < ne) {
      sum_e += -softplus(-z);  // log D
      dz(i, 0) = (1.0 - s) / static_cast<double>(ne);
    } else {
      sum_p += -softplus(z);  // log(1 - D)
      dz(i, 0) = -s / static_cast<double>(np);
    }
  }
  DiscObjective out{sum_e / static_cast<double>(ne) + sum_p / static_cast<double>(np), {}};
  if (with_grad) out.grad = d.net.backward_from_logits(tape, dz);
  return out;
}

}  // namespace

DiscObjective discriminator_objective(const Discriminator& d, const std::vector<Transition>& expert,
                                      const std::vector<Transition>& policy) {
  return evaluate_objective(d, expert, policy, true);
}

std::optional<DiscUpdateResult> disc_update(Discriminator& d, const std::vector<Transition>& expert,
                                            const std::vector<Transition>& policy, std::size_t steps) {
  if (expert.empty() || policy.empty()) return std::nullopt;
  if (expert.size() != policy.size())
    throw std::invalid_argument("disc_update: expert and policy batches must have the same size");
  Mat policy_obs(static_cast<Eigen::Index>(policy.size()), static_cast<Eigen::Index>(d.obs_dim()));
  for (std::size_t i = 0; i < policy.size(); ++i) policy_obs.row(static_cast<Eigen::Index>(i)) = policy[i].obs.transpose();
  d.obs_norm.update(policy_obs);

  DiscUpdateResult res{0.0, 0.0};
  for (std::size_t k = 0; k < steps; ++k) {
    auto obj = discriminator_objective(d, expert, policy);
    if (k == 0) res.objective_before = obj.value;
    obj.grad.scale(-1.0);  // Adam descends
    clip_global_norm(obj.grad, d.grad_clip);
    adam_step(d.net, obj.grad, d.adam);
  }
  res.objective_after = evaluate_objective(d, expert, policy, false).value;
  if (steps == 0) res.objective_before = res.objective_after;
  return res;
}

double ImitationSchedule::growth_to_reach(double lambda0, double lambda_max, double episodes) {
  if (lambda0 <= 0.0 || lambda_max <= lambda0 || episodes <= 0.0) return 1.0;
  return std::exp(std::log(lambda_max / lambda0) / episodes);
}

double lambda_at(const ImitationSchedule& s, std::size_t n) {
  const double v = s.lambda0 * std::pow(s.growth, static_cast<double>(n));
  return std::min(v, s.lambda_max);
}

void save_discriminator(const Discriminator& d, const std::filesystem::path& weights,
                        const std::filesystem::path& norm) {
  save_weights(d.net, weights);
  std::ofstream out(norm);
  if (!out) throw std::runtime_error("cannot write " + norm.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "count " << d.obs_norm.count << "\nmean";
  for (Eigen::Index i = 0; i < d.obs_norm.mean.size(); ++i) out << ' ' << d.obs_norm.mean[i];
  out << "\nstd";
  const Vec sd = d.obs_norm.stddev();
  for (Eigen::Index i = 0; i < sd.size(); ++i) out << ' ' << sd[i];
  out << '\n';
}

}  // namespace igasil
