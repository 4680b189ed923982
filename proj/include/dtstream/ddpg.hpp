#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dtstream/env.hpp"
#include "dtstream/nn.hpp"
#include "dtstream/ou_noise.hpp"
#include "dtstream/replay.hpp"
#include "dtstream/twin.hpp"

namespace dtstream {

struct AgentConfig {
  std::vector<std::size_t> hidden{512, 256, 128};
  double discount = 0.95;
  // Soft-update coefficient of the target networks.
  double tau = 0.005;
  double actor_rate = 1e-6;
  double critic_rate = 1e-4;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::size_t batch = 128;
  std::size_t replay_capacity = 6000;
  // Updates start once the replay holds warmup_batches * batch tuples.
  std::size_t warmup_batches = 5;
  OuParams noise;
  double sigma_start = 0.2;
  double sigma_end = 0.02;
  double final_layer_bound = 3e-3;

  void validate() const;
};

struct UpdateStats {
  bool updated = false;
  double critic_loss = 0.0;
  double actor_grad_norm = 0.0;
};

// Actor-critic pair with target copies. Actions live in [0, 1]: the actor's
// tanh output goes through map_tanh, and the critic sees state followed by
// that [0, 1] action.
class DdpgAgent {
 public:
  DdpgAgent(std::size_t state_dim, std::size_t action_dim, AgentConfig config,
            std::uint64_t seed);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const AgentConfig& config() const { return config_; }

  // Policy output mapped to [0, 1]; with explore, plus one OU step, clamped.
  std::vector<double> act(std::span<const double> state, bool explore);

  void remember(std::span<const double> state, std::span<const double> action, double reward,
                std::span<const double> next_state);
  bool ready() const;

  // One regression step of the critic towards r + discount Q'(s', pi'(s')).
  // Returns the mean squared error before the step.
  double critic_update(std::span<const std::size_t> batch);
  // One ascent step of the actor on mean Q(s, pi(s)). Returns the norm of
  // the actor parameter gradient.
  double actor_update(std::span<const std::size_t> batch);
  void soft_update_targets();

  // Samples a batch and runs critic, actor and target updates. No-op until ready().
  UpdateStats learn();

  void begin_episode() { noise_.reset(); }
  void set_noise_sigma(double sigma) { noise_.set_sigma(sigma); }
  double noise_sigma() const { return noise_.params().sigma; }

  DenseNet& actor() { return actor_; }
  DenseNet& critic() { return critic_; }
  DenseNet& target_actor() { return target_actor_; }
  DenseNet& target_critic() { return target_critic_; }
  const DenseNet& actor() const { return actor_; }
  const DenseNet& critic() const { return critic_; }
  const ReplayMemory& replay() const { return replay_; }
  OuNoise& noise() { return noise_; }

  // Gradient of mean Q(s, pi(s)) with respect to the actor parameters, for
  // the states of `batch`. Exposed for checks.
  std::vector<double> actor_objective_gradient(std::span<const std::size_t> batch);

 private:
  void gather(std::span<const std::size_t> batch);

  std::size_t state_dim_;
  std::size_t action_dim_;
  AgentConfig config_;
  std::mt19937_64 rng_;
  DenseNet actor_;
  DenseNet critic_;
  DenseNet target_actor_;
  DenseNet target_critic_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  ReplayMemory replay_;
  OuNoise noise_;

  // Batch workspaces.
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<double> joint_;
  std::vector<double> grad_out_;
  std::vector<double> grad_in_;
  std::vector<double> actor_grad_;
  std::vector<double> critic_grad_;
  DenseNet::Tape actor_tape_;
  DenseNet::Tape critic_tape_;
  DenseNet::Tape target_tape_;
};

struct CurveRow {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double critic_loss = 0.0;
  double actor_grad_norm = 0.0;
  double noise_sigma = 0.0;
};

struct TrainOptions {
  std::size_t episodes = 1500;
  std::uint64_t seed = 0;
  // Called after every slot.
  std::function<void(std::size_t episode, const StepOutcome&)> on_step;
};

// Noise scale for an episode: linear from sigma_start to sigma_end.
double noise_schedule(const AgentConfig& config, std::size_t episode, std::size_t episodes);

// Runs the training episodes and returns the learning curve. Throws
// TrainingAborted on a non-finite loss or gradient.
std::vector<CurveRow> train(StreamingEnv& env, TwinBank& twins, DdpgAgent& agent,
                            const TrainOptions& options);

}  // namespace dtstream
