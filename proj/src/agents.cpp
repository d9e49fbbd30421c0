#include "igasil/agents.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace igasil {

std::string_view to_string(AgentVariant v) {
  switch (v) {
    case AgentVariant::igasil: return "igasil";
    case AgentVariant::iac: return "iac";
    case AgentVariant::iac_per: return "iac_per";
    case AgentVariant::iddpg: return "iddpg";
    case AgentVariant::igasil_onpolicy: return "igasil_onpolicy";
  }
  return "?";
}

AgentVariant parse_variant(std::string_view s) {
  for (auto v : {AgentVariant::igasil, AgentVariant::iac, AgentVariant::iac_per, AgentVariant::iddpg,
                 AgentVariant::igasil_onpolicy})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown variant '" + std::string(s) +
                              "' (valid: igasil, iac, iac_per, iddpg, igasil_onpolicy)");
}

bool uses_discriminator(AgentVariant v) { return v != AgentVariant::iac && v != AgentVariant::iddpg; }

std::size_t scer_subtrajectories(AgentVariant v, std::size_t configured) {
  return v == AgentVariant::iac_per ? 0 : configured;
}

bool is_on_policy(AgentVariant v) { return v == AgentVariant::igasil_onpolicy; }

double Agent::checksum() const {
  double s = 0.0;
  for (const auto& [role, net] : networks()) s += net->checksum();
  return s;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layer_dims() != online.layer_dims()) throw std::invalid_argument("soft_update: shape mismatch");
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  auto& W = target.mutable_weights();
  auto& B = target.mutable_biases();
  auto blend = [tau](auto& t, const auto& o) {
    if (tau == 1.0) {
      t = o;
      return;
    }
    auto lo = t.cwiseMin(o).eval();
    auto hi = t.cwiseMax(o).eval();
    t = (t + tau * (o - t)).cwiseMax(lo).cwiseMin(hi);
  };
  for (std::size_t l = 0; l < W.size(); ++l) {
    blend(W[l], online.weights()[l]);
    blend(B[l], online.biases()[l]);
  }
}

namespace {

struct BatchMats {
  Mat obs, next_obs, action;
  Vec reward, not_done;
  std::vector<int> index;
};

BatchMats stack(const std::vector<Transition>& batch) {
  if (batch.empty()) throw std::invalid_argument("agent update on an empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchMats m;
  m.obs.resize(n, batch[0].obs.size());
  m.next_obs.resize(n, batch[0].next_obs.size());
  m.action.resize(n, batch[0].action.size());
  m.reward.resize(n);
  m.not_done.resize(n);
  m.index.resize(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    m.obs.row(i) = t.obs.transpose();
    m.next_obs.row(i) = t.next_obs.transpose();
    m.action.row(i) = t.action.transpose();
    m.reward[i] = t.reward;
    m.not_done[i] = t.done ? 0.0 : 1.0;
    m.index[static_cast<std::size_t>(i)] = t.action_index;
  }
  return m;
}

void check_finite(double value, std::string_view what, const std::vector<Transition>& batch) {
  if (std::isfinite(value)) return;
  double rmin = 0.0, rmax = 0.0;
  if (!batch.empty()) {
    rmin = rmax = batch[0].reward;
    for (const auto& t : batch) {
      rmin = std::min(rmin, t.reward);
      rmax = std::max(rmax, t.reward);
    }
  }
  std::ostringstream msg;
  msg << "non-finite " << what << " (batch size " << batch.size() << ", reward range [" << rmin << ", "
      << rmax << "])";
  throw std::domain_error(msg.str());
}

void descend(Mlp& net, Gradients grad, AdamState& adam, double clip) {
  clip_global_norm(grad, clip);
  adam_step(net, grad, adam);
}

Mat log_softmax(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    out.row(r) = z.row(r).array() - lse;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------- A2C

A2cAgent::A2cAgent(std::size_t obs_dim, std::size_t n_actions, const AgentConfig& c, std::mt19937_64& rng)
    : actor({obs_dim, c.hidden, c.hidden, n_actions}, OutputHead::softmax, rng),
      critic({obs_dim, c.hidden, c.hidden, 1}, OutputHead::linear, rng),
      actor_adam(actor, c.actor_lr),
      critic_adam(critic, c.critic_lr),
      cfg(c),
      n_actions_(n_actions) {}

Vec A2cAgent::log_policy(const Vec& obs) const {
  GradTape tape;
  actor.forward(Mat(obs.transpose()), &tape);
  return log_softmax(tape.pre.back()).row(0).transpose();
}

ActResult A2cAgent::act(const Vec& obs, bool explore, std::mt19937_64& rng) const {
  const Vec logp = log_policy(obs);
  int a = 0;
  if (explore) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    a = static_cast<int>(n_actions_) - 1;
    for (Eigen::Index k = 0; k < logp.size(); ++k) {
      x -= std::exp(logp[k]);
      if (x < 0.0) {
        a = static_cast<int>(k);
        break;
      }
    }
  } else {
    logp.maxCoeff(&a);
  }
  return {AgentAction::discrete(a, n_actions_), logp[a]};
}

ActResult A2cAgent::random_action(std::mt19937_64& rng) const {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n_actions_) - 1);
  const int a = pick(rng);
  return {AgentAction::discrete(a, n_actions_), -std::log(static_cast<double>(n_actions_))};
}

UpdateStats A2cAgent::update(const std::vector<Transition>& batch) { return a2c_update(*this, batch); }

std::vector<std::pair<std::string, const Mlp*>> A2cAgent::networks() const {
  return {{"actor", &actor}, {"critic", &critic}};
}

void A2cAgent::load_network(std::string_view role, Mlp net) {
  Mlp& slot = role == "actor" ? actor : role == "critic" ? critic : throw std::invalid_argument("unknown role");
  if (net.layer_dims() != slot.layer_dims() || net.output_head() != slot.output_head())
    throw std::runtime_error("checkpoint shape does not match the agent's " + std::string(role));
  slot = std::move(net);
}

Vec a2c_targets(const A2cAgent& agent, const std::vector<Transition>& batch) {
  const BatchMats m = stack(batch);
  const Vec v_next = agent.critic.forward(m.next_obs).col(0);
  return m.reward + agent.cfg.gamma * m.not_done.cwiseProduct(v_next);
}

LossAndGrad a2c_critic_loss(const A2cAgent& agent, const std::vector<Transition>& batch) {
  const BatchMats m = stack(batch);
  const Vec y = a2c_targets(agent, batch);
  GradTape tape;
  const Vec v = agent.critic.forward(m.obs, &tape).col(0);
  const Vec err = v - y;
  const double n = static_cast<double>(batch.size());
  Mat g = (2.0 / n) * err;
  return {err.squaredNorm() / n, agent.critic.backward(tape, g)};
}

PolicyObjective a2c_policy_objective(const A2cAgent& agent, const std::vector<Transition>& batch) {
  const BatchMats m = stack(batch);
  const Vec y = a2c_targets(agent, batch);
  const Vec v = agent.critic.forward(m.obs).col(0);
  const Vec adv = y - v;
  const double n = static_cast<double>(batch.size());

  GradTape tape;
  agent.actor.forward(m.obs, &tape);
  const Mat logp = log_softmax(tape.pre.back());
  const Mat p = logp.array().exp().matrix();
  const auto k = logp.cols();

  Mat dz = Mat::Zero(logp.rows(), k);
  double objective = 0.0;
  double entropy_sum = 0.0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const int a = m.index[static_cast<std::size_t>(i)];
    if (a < 0 || a >= k) throw std::invalid_argument("a2c update needs discrete action indices");
    double w = 1.0;
    if (agent.cfg.importance_sampling) {
      const auto& mu = batch[static_cast<std::size_t>(i)].behavior_logp;
      if (mu) w = std::min(std::exp(logp(i, a) - *mu), agent.cfg.is_clip);
    }
    const double h = -(p.row(i).array() * logp.row(i).array()).sum();
    entropy_sum += h;
    objective += w * adv[i] * logp(i, a) + agent.cfg.entropy_coef * h;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double dlogp = (j == a ? 1.0 : 0.0) - p(i, j);
      const double dh = -p(i, j) * (logp(i, j) + h);
      dz(i, j) = (w * adv[i] * dlogp + agent.cfg.entropy_coef * dh) / n;
    }
  }
  return {objective / n, agent.actor.backward_from_logits(tape, dz), entropy_sum / n};
}

UpdateStats a2c_update(A2cAgent& agent, const std::vector<Transition>& batch) {
  auto critic = a2c_critic_loss(agent, batch);
  auto policy = a2c_policy_objective(agent, batch);
  check_finite(critic.value, "A2C critic loss", batch);
  check_finite(policy.value, "A2C policy objective", batch);
  descend(agent.critic, std::move(critic.grad), agent.critic_adam, agent.cfg.grad_clip);
  policy.grad.scale(-1.0);
  descend(agent.actor, std::move(policy.grad), agent.actor_adam, agent.cfg.grad_clip);
  return {critic.value, policy.value, policy.entropy};
}

// --------------------------------------------------------------------- DDPG

DdpgAgent::DdpgAgent(std::size_t obs_dim, std::size_t action_dim, const AgentConfig& c, std::mt19937_64& rng)
    : actor({obs_dim, c.hidden, c.hidden, action_dim}, OutputHead::tanh, rng),
      critic({obs_dim + action_dim, c.hidden, c.hidden, 1}, OutputHead::linear, rng),
      target_actor(actor),
      target_critic(critic),
      actor_adam(actor, c.actor_lr),
      critic_adam(critic, c.critic_lr),
      cfg(c),
      action_dim_(action_dim),
      sigma_(c.noise_start) {}

ActResult DdpgAgent::act(const Vec& obs, bool explore, std::mt19937_64& rng) const {
  Vec a = actor.forward_one(obs);
  if (explore) {
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += sigma_ * noise(rng);
    a = a.cwiseMax(-1.0).cwiseMin(1.0);
  }
  return {AgentAction::continuous(std::move(a)), std::nullopt};
}

ActResult DdpgAgent::random_action(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec a(static_cast<Eigen::Index>(action_dim_));
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = u(rng);
  return {AgentAction::continuous(std::move(a)), std::nullopt};
}

void DdpgAgent::set_progress(double progress) {
  const double t = std::clamp(progress, 0.0, 1.0);
  sigma_ = cfg.noise_start + (cfg.noise_end - cfg.noise_start) * t;
}

UpdateStats DdpgAgent::update(const std::vector<Transition>& batch) {
  const auto s = ddpg_update(*this, batch);
  return {s.critic_loss, s.actor_objective, 0.0};
}

std::vector<std::pair<std::string, const Mlp*>> DdpgAgent::networks() const {
  return {{"actor", &actor}, {"critic", &critic}, {"target_actor", &target_actor}, {"target_critic", &target_critic}};
}

void DdpgAgent::load_network(std::string_view role, Mlp net) {
  Mlp* slot = role == "actor"           ? &actor
              : role == "critic"        ? &critic
              : role == "target_actor"  ? &target_actor
              : role == "target_critic" ? &target_critic
                                        : nullptr;
  if (!slot) throw std::invalid_argument("unknown network role '" + std::string(role) + "'");
  if (net.layer_dims() != slot->layer_dims() || net.output_head() != slot->output_head())
    throw std::runtime_error("checkpoint shape does not match the agent's " + std::string(role));
  *slot = std::move(net);
}

Vec ddpg_targets(const DdpgAgent& agent, const std::vector<Transition>& batch) {
  const BatchMats m = stack(batch);
  const Mat next_action = agent.target_actor.forward(m.next_obs);
  const Vec q_next = agent.target_critic.forward(hcat(m.next_obs, next_action)).col(0);
  return m.reward + agent.cfg.gamma * m.not_done.cwiseProduct(q_next);
}

LossAndGrad ddpg_critic_loss(const DdpgAgent& agent, const std::vector<Transition>& batch) {
  const BatchMats m = stack(batch);
  const Vec y = ddpg_targets(agent, batch);
  GradTape tape;
  const Vec q = agent.critic.forward(hcat(m.obs, m.action), &tape).col(0);
  const Vec err = q - y;
  const double n = static_cast<double>(batch.size());
  Mat g = (2.0 / n) * err;
  return {err.squaredNorm() / n, agent.critic.backward(tape, g)};
}

LossAndGrad ddpg_actor_objective(const DdpgAgent& agent, const std::vector<Transition>& batch) {
  const BatchMats m = stack(batch);
  const double n = static_cast<double>(batch.size());
  GradTape actor_tape;
  const Mat a = agent.actor.forward(m.obs, &actor_tape);
  GradTape critic_tape;
  const Vec q = agent.critic.forward(hcat(m.obs, a), &critic_tape).col(0);
  const Gradients through_critic = agent.critic.backward(critic_tape, Mat::Constant(q.size(), 1, 1.0 / n));
  const Mat dq_da = through_critic.input.rightCols(a.cols());
  return {q.mean(), agent.actor.backward(actor_tape, dq_da)};
}

DdpgStats ddpg_update(DdpgAgent& agent, const std::vector<Transition>& batch) {
  auto critic = ddpg_critic_loss(agent, batch);
  check_finite(critic.value, "DDPG critic loss", batch);
  descend(agent.critic, std::move(critic.grad), agent.critic_adam, agent.cfg.grad_clip);

  auto actor = ddpg_actor_objective(agent, batch);
  check_finite(actor.value, "DDPG actor objective", batch);
  actor.grad.scale(-1.0);
  descend(agent.actor, std::move(actor.grad), agent.actor_adam, agent.cfg.grad_clip);

  soft_update(agent.target_critic, agent.critic, agent.cfg.tau);
  soft_update(agent.target_actor, agent.actor, agent.cfg.tau);
  return {critic.value, actor.value};
}

std::unique_ptr<Agent> make_agent(const ActionSpace& space, std::size_t obs_dim, const AgentConfig& cfg,
                                  std::mt19937_64& rng) {
  if (space.kind == ActionKind::discrete) return std::make_unique<A2cAgent>(obs_dim, space.dim, cfg, rng);
  return std::make_unique<DdpgAgent>(obs_dim, space.dim, cfg, rng);
}

}  // namespace igasil
