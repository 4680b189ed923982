#include "dtstream/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dtstream/errors.hpp"
#include "dtstream/simd/kernels.hpp"

namespace dtstream {

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                     std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void AgentConfig::validate() const {
  if (!(discount >= 0.0 && discount < 1.0)) throw InvalidArgument("agent: discount must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("agent: tau must lie in (0, 1]");
  if (!(actor_rate > 0.0) || !(critic_rate > 0.0)) throw InvalidArgument("agent: rates must be positive");
  if (batch == 0) throw InvalidArgument("agent: batch must be positive");
  if (replay_capacity < batch) throw InvalidArgument("agent: replay smaller than one batch");
  if (!(sigma_start >= 0.0) || !(sigma_end >= 0.0)) throw InvalidArgument("agent: noise sigma must be >= 0");
  for (std::size_t h : hidden) {
    if (h == 0) throw InvalidArgument("agent: hidden layers must be non-empty");
  }
}

DdpgAgent::DdpgAgent(std::size_t state_dim, std::size_t action_dim, AgentConfig config,
                     std::uint64_t seed)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      config_(std::move(config)),
      rng_(stream_seed(seed, 0)),
      actor_(layer_sizes(state_dim, config_.hidden, action_dim), OutputActivation::kTanh),
      critic_(layer_sizes(state_dim + action_dim, config_.hidden, 1), OutputActivation::kIdentity),
      replay_(config_.replay_capacity, state_dim, action_dim),
      noise_(action_dim, config_.noise, stream_seed(seed, 1)) {
  config_.validate();
  std::mt19937_64 init(stream_seed(seed, 2));
  actor_.init_uniform(init, config_.final_layer_bound);
  critic_.init_uniform(init, config_.final_layer_bound);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = Optimizer(actor_.parameter_count(), {config_.optimizer, config_.actor_rate});
  critic_opt_ = Optimizer(critic_.parameter_count(), {config_.optimizer, config_.critic_rate});
  noise_.set_sigma(config_.sigma_start);
  actor_grad_.resize(actor_.parameter_count());
  critic_grad_.resize(critic_.parameter_count());
}

std::vector<double> DdpgAgent::act(std::span<const double> state, bool explore) {
  std::vector<double> a = actor_.predict(state);
  for (double& x : a) x = map_tanh(x);
  if (explore) {
    std::span<const double> n = noise_.step();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i] + n[i], 0.0, 1.0);
  }
  return a;
}

void DdpgAgent::remember(std::span<const double> state, std::span<const double> action,
                         double reward, std::span<const double> next_state) {
  replay_.push(state, action, reward, next_state);
}

bool DdpgAgent::ready() const {
  return replay_.size() >= std::max(config_.batch, config_.warmup_batches * config_.batch);
}

void DdpgAgent::gather(std::span<const std::size_t> batch) {
  const std::size_t n = batch.size();
  if (n == 0) throw InvalidArgument("agent: empty batch");
  states_.resize(n * state_dim_);
  next_states_.resize(n * state_dim_);
  actions_.resize(n * action_dim_);
  rewards_.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t i = batch[b];
    std::ranges::copy(replay_.state(i), states_.begin() + b * state_dim_);
    std::ranges::copy(replay_.next_state(i), next_states_.begin() + b * state_dim_);
    std::ranges::copy(replay_.action(i), actions_.begin() + b * action_dim_);
    rewards_[b] = replay_.reward(i);
  }
}

double DdpgAgent::critic_update(std::span<const std::size_t> batch) {
  gather(batch);
  const std::size_t n = batch.size();
  const std::size_t joint_dim = state_dim_ + action_dim_;

  // Targets from the target networks.
  target_actor_.forward(next_states_, n, target_tape_);
  joint_.resize(n * joint_dim);
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(next_states_.begin() + b * state_dim_, state_dim_, joint_.begin() + b * joint_dim);
    for (std::size_t j = 0; j < action_dim_; ++j) {
      joint_[b * joint_dim + state_dim_ + j] = map_tanh(target_tape_.output()[b * action_dim_ + j]);
    }
  }
  target_critic_.forward(joint_, n, target_tape_);
  std::vector<double> y(n);
  for (std::size_t b = 0; b < n; ++b) y[b] = rewards_[b] + config_.discount * target_tape_.output()[b];

  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(states_.begin() + b * state_dim_, state_dim_, joint_.begin() + b * joint_dim);
    std::copy_n(actions_.begin() + b * action_dim_, action_dim_,
                joint_.begin() + b * joint_dim + state_dim_);
  }
  critic_.forward(joint_, n, critic_tape_);
  double loss = 0.0;
  grad_out_.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double err = critic_tape_.output()[b] - y[b];
    loss += err * err;
    grad_out_[b] = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) {
    throw TrainingAborted("critic loss is not finite (batch " + std::to_string(n) + ")");
  }
  critic_.backward(critic_tape_, grad_out_, critic_grad_, {});
  if (!all_finite(critic_grad_)) throw TrainingAborted("critic gradient is not finite");
  critic_opt_.step(critic_grad_, critic_.parameters());
  return loss;
}

std::vector<double> DdpgAgent::actor_objective_gradient(std::span<const std::size_t> batch) {
  gather(batch);
  const std::size_t n = batch.size();
  const std::size_t joint_dim = state_dim_ + action_dim_;

  actor_.forward(states_, n, actor_tape_);
  joint_.resize(n * joint_dim);
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(states_.begin() + b * state_dim_, state_dim_, joint_.begin() + b * joint_dim);
    for (std::size_t j = 0; j < action_dim_; ++j) {
      joint_[b * joint_dim + state_dim_ + j] = map_tanh(actor_tape_.output()[b * action_dim_ + j]);
    }
  }
  critic_.forward(joint_, n, critic_tape_);
  grad_out_.assign(n, 1.0 / static_cast<double>(n));
  grad_in_.resize(n * joint_dim);
  critic_.backward(critic_tape_, grad_out_, critic_grad_, grad_in_);

  // d mean Q / d tanh output = dQ/da * 0.5 from the [-1, 1] -> [0, 1] map.
  std::vector<double> seed(n * action_dim_);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < action_dim_; ++j) {
      seed[b * action_dim_ + j] = 0.5 * grad_in_[b * joint_dim + state_dim_ + j];
    }
  }
  std::vector<double> grad(actor_.parameter_count());
  actor_.backward(actor_tape_, seed, grad, {});
  return grad;
}

double DdpgAgent::actor_update(std::span<const std::size_t> batch) {
  actor_grad_ = actor_objective_gradient(batch);
  if (!all_finite(actor_grad_)) throw TrainingAborted("actor gradient is not finite");
  const double norm = std::sqrt(simd::dot(actor_grad_, actor_grad_));
  // Ascent on Q is descent on -Q.
  for (double& g : actor_grad_) g = -g;
  actor_opt_.step(actor_grad_, actor_.parameters());
  return norm;
}

void DdpgAgent::soft_update_targets() {
  soft_update(actor_, target_actor_, config_.tau);
  soft_update(critic_, target_critic_, config_.tau);
}

UpdateStats DdpgAgent::learn() {
  UpdateStats stats;
  if (!ready()) return stats;
  const std::vector<std::size_t> batch = replay_.sample(config_.batch, rng_);
  stats.critic_loss = critic_update(batch);
  stats.actor_grad_norm = actor_update(batch);
  soft_update_targets();
  stats.updated = true;
  return stats;
}

double noise_schedule(const AgentConfig& config, std::size_t episode, std::size_t episodes) {
  if (episodes <= 1) return config.sigma_start;
  const double f = std::min(1.0, static_cast<double>(episode) / static_cast<double>(episodes - 1));
  return config.sigma_start + (config.sigma_end - config.sigma_start) * f;
}

std::vector<CurveRow> train(StreamingEnv& env, TwinBank& twins, DdpgAgent& agent,
                            const TrainOptions& options) {
  if (agent.state_dim() != env.state_dim() || agent.action_dim() != env.action_dim()) {
    throw InvalidArgument("train: agent and environment dimensions differ");
  }
  std::vector<CurveRow> curve;
  curve.reserve(options.episodes);
  for (std::size_t ep = 0; ep < options.episodes; ++ep) {
    CurveRow row;
    row.episode = ep;
    row.noise_sigma = noise_schedule(agent.config(), ep, options.episodes);
    agent.set_noise_sigma(row.noise_sigma);
    agent.begin_episode();
    std::vector<double> state = env.reset(episode_seed(options.seed, ep));
    std::size_t steps = 0;
    std::size_t updates = 0;
    while (!env.done()) {
      const std::vector<double> action = agent.act(state, true);
      const std::vector<DeliveryDecision> decisions = env.decode_action(action);
      StepOutcome out = env.step(decisions, twins);
      agent.remember(state, action, out.reward, out.next_state);
      UpdateStats stats;
      try {
        stats = agent.learn();
      } catch (const TrainingAborted& e) {
        std::ostringstream msg;
        msg << e.what() << " at episode " << ep << ", slot " << out.slot;
        throw TrainingAborted(msg.str());
      }
      if (stats.updated) {
        ++updates;
        row.critic_loss += stats.critic_loss;
        row.actor_grad_norm += stats.actor_grad_norm;
      }
      row.mean_reward += out.reward;
      ++steps;
      if (options.on_step) options.on_step(ep, out);
      state = std::move(out.next_state);
    }
    row.mean_reward /= static_cast<double>(std::max<std::size_t>(steps, 1));
    if (updates > 0) {
      row.critic_loss /= static_cast<double>(updates);
      row.actor_grad_norm /= static_cast<double>(updates);
    }
    curve.push_back(row);
  }
  return curve;
}

}  // namespace dtstream
