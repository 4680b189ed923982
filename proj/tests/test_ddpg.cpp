#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "dtstream/ddpg.hpp"
#include "dtstream/errors.hpp"

using namespace dtstream;

namespace {

AgentConfig small_config(std::vector<std::size_t> hidden = {16, 8}) {
  AgentConfig c;
  c.hidden = std::move(hidden);
  c.batch = 4;
  c.warmup_batches = 1;
  c.replay_capacity = 64;
  return c;
}

void fill_replay(DdpgAgent& agent, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> s(agent.state_dim());
  std::vector<double> a(agent.action_dim());
  std::vector<double> s2(agent.state_dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : s) x = unit(rng);
    for (double& x : a) x = unit(rng);
    for (double& x : s2) x = unit(rng);
    agent.remember(s, a, unit(rng) - 0.5, s2);
  }
}

// Gives the tiny final layers enough weight that gradients are not all
// vanishingly small.
void widen(DenseNet& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (double& p : net.parameters()) p = dist(rng);
}

std::vector<double> params_of(const DenseNet& net) {
  return {net.parameters().begin(), net.parameters().end()};
}

double q_value(const DenseNet& critic, std::span<const double> s, std::span<const double> a) {
  std::vector<double> in(s.begin(), s.end());
  in.insert(in.end(), a.begin(), a.end());
  return critic.predict(in)[0];
}

// Mean Q(s, pi(s)) over the replay entries `batch`.
double actor_objective(const DdpgAgent& agent, std::span<const std::size_t> batch) {
  double total = 0.0;
  for (std::size_t i : batch) {
    const auto s = agent.replay().state(i);
    std::vector<double> a = agent.actor().predict(s);
    for (double& x : a) x = map_tanh(x);
    total += q_value(agent.critic(), s, a);
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("critic action gradient matches finite differences") {
  DdpgAgent agent(5, 3, small_config(), 1);
  widen(agent.critic(), 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> joint(8);
  for (double& x : joint) x = unit(rng);

  DenseNet::Tape tape;
  agent.critic().forward(joint, 1, tape);
  std::vector<double> grad(agent.critic().parameter_count());
  std::vector<double> grad_in(8);
  agent.critic().backward(tape, std::vector<double>{1.0}, grad, grad_in);
  const double h = 1e-5;
  for (std::size_t j = 5; j < 8; ++j) {
    std::vector<double> up = joint;
    std::vector<double> down = joint;
    up[j] += h;
    down[j] -= h;
    const double fd = (agent.critic().predict(up)[0] - agent.critic().predict(down)[0]) / (2 * h);
    CHECK(grad_in[j] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("actor gradient is a first-order ascent direction") {
  DdpgAgent agent(4, 2, small_config(), 4);
  widen(agent.actor(), 5);
  widen(agent.critic(), 6);
  fill_replay(agent, 16, 7);
  const std::vector<std::size_t> batch{0, 3, 5, 9, 12};
  const std::vector<double> grad = agent.actor_objective_gradient(batch);

  const double h = 1e-6;
  const double norm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
  REQUIRE(norm > 0.0);
  std::span<double> p = agent.actor().parameters();
  const std::vector<double> keep(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = keep[i] + h * grad[i] / norm;
  const double up = actor_objective(agent, batch);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = keep[i] - h * grad[i] / norm;
  const double down = actor_objective(agent, batch);
  std::ranges::copy(keep, p.begin());
  const double base = actor_objective(agent, batch);
  CHECK((up - down) / (2 * h) == doctest::Approx(norm).epsilon(1e-4));
  CHECK(up >= base);

  // Per-coordinate check on a sample of parameters.
  for (std::size_t i = 0; i < p.size(); i += 7) {
    p[i] = keep[i] + 1e-5;
    const double u = actor_objective(agent, batch);
    p[i] = keep[i] - 1e-5;
    const double d = actor_objective(agent, batch);
    p[i] = keep[i];
    const double fd = (u - d) / 2e-5;
    CHECK(std::abs(grad[i] - fd) <= 1e-4 * std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
  }
}

TEST_CASE("critic constant in the action gives no actor gradient") {
  DdpgAgent agent(3, 2, small_config({6}), 8);
  widen(agent.actor(), 9);
  widen(agent.critic(), 10);
  // Zero the first-layer columns that read the action.
  auto w = agent.critic().weights(0);
  for (std::size_t o = 0; o < 6; ++o) {
    w[o * 5 + 3] = 0.0;
    w[o * 5 + 4] = 0.0;
  }
  fill_replay(agent, 8, 11);
  const std::vector<std::size_t> batch{0, 1, 2};
  for (double g : agent.actor_objective_gradient(batch)) CHECK(g == 0.0);
}

TEST_CASE("batch gradient is the mean of single-tuple gradients") {
  DdpgAgent agent(3, 2, small_config({6}), 12);
  widen(agent.actor(), 13);
  widen(agent.critic(), 14);
  fill_replay(agent, 8, 15);
  const std::vector<double> g0 = agent.actor_objective_gradient(std::vector<std::size_t>{2});
  const std::vector<double> g1 = agent.actor_objective_gradient(std::vector<std::size_t>{5});
  const std::vector<double> both = agent.actor_objective_gradient(std::vector<std::size_t>{2, 5});
  for (std::size_t i = 0; i < both.size(); ++i) {
    CHECK(both[i] == doctest::Approx(0.5 * (g0[i] + g1[i])).epsilon(1e-12));
  }
}

TEST_CASE("critic targets") {
  AgentConfig config = small_config({2});
  config.optimizer = OptimizerKind::kSgd;

  SUBCASE("zero discount regresses on the rewards") {
    config.discount = 0.0;
    DdpgAgent agent(2, 1, config, 16);
    widen(agent.critic(), 17);
    fill_replay(agent, 6, 18);
    const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5};
    double want = 0.0;
    for (std::size_t i : batch) {
      const double err = q_value(agent.critic(), agent.replay().state(i), agent.replay().action(i)) -
                         agent.replay().reward(i);
      want += err * err;
    }
    CHECK(agent.critic_update(batch) == doctest::Approx(want / 6.0).epsilon(1e-12));
  }

  SUBCASE("two-tuple loss by hand") {
    config.discount = 0.5;
    DdpgAgent agent(1, 1, config, 19);
    // Critic: h = relu(W [s, a] + b), Q = v . h + c.
    DenseNet& q = agent.critic();
    const double w[] = {1.0, 2.0, -1.0, 0.5};
    std::copy(std::begin(w), std::end(w), q.weights(0).begin());
    q.biases(0)[0] = 0.1;
    q.biases(0)[1] = 0.2;
    q.weights(1)[0] = 1.5;
    q.weights(1)[1] = -2.0;
    q.biases(1)[0] = 0.3;
    agent.target_critic() = q;
    // Target actor outputs tanh(0) = 0, i.e. action 0.5.
    for (double& p : agent.target_actor().parameters()) p = 0.0;

    auto hand_q = [](double s, double a) {
      const double h0 = std::max(0.0, 1.0 * s + 2.0 * a + 0.1);
      const double h1 = std::max(0.0, -1.0 * s + 0.5 * a + 0.2);
      return 1.5 * h0 - 2.0 * h1 + 0.3;
    };
    agent.remember(std::vector<double>{0.2}, std::vector<double>{0.7}, 1.0, std::vector<double>{0.4});
    agent.remember(std::vector<double>{0.9}, std::vector<double>{0.1}, -0.5, std::vector<double>{0.3});
    const double y0 = 1.0 + 0.5 * hand_q(0.4, 0.5);
    const double y1 = -0.5 + 0.5 * hand_q(0.3, 0.5);
    const double e0 = hand_q(0.2, 0.7) - y0;
    const double e1 = hand_q(0.9, 0.1) - y1;
    CHECK(agent.critic_update(std::vector<std::size_t>{0, 1}) ==
          doctest::Approx((e0 * e0 + e1 * e1) / 2.0).epsilon(1e-12));
  }

  SUBCASE("consistent tuples give zero loss and no step") {
    config.discount = 0.0;
    config.critic_rate = 0.1;
    DdpgAgent agent(1, 1, config, 20);
    widen(agent.critic(), 21);
    const std::vector<double> s{0.3};
    const std::vector<double> a{0.6};
    const double r = q_value(agent.critic(), s, a);
    agent.remember(s, a, r, s);
    agent.remember(s, a, r, s);
    const std::vector<double> before = params_of(agent.critic());
    CHECK(agent.critic_update(std::vector<std::size_t>{0, 1}) == 0.0);
    CHECK(params_of(agent.critic()) == before);
  }
}

TEST_CASE("acting") {
  DdpgAgent agent(4, 3, small_config(), 22);
  widen(agent.actor(), 23);
  const std::vector<double> s{0.1, 0.5, 0.9, 0.3};
  std::vector<double> want = agent.actor().predict(s);
  for (double& x : want) x = map_tanh(x);
  CHECK(agent.act(s, false) == want);

  agent.set_noise_sigma(0.0);
  agent.begin_episode();
  CHECK(agent.act(s, true) == want);

  agent.set_noise_sigma(2.0);
  for (int i = 0; i < 10000; ++i) {
    for (double x : agent.act(s, true)) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
  }
}

TEST_CASE("ou noise") {
  OuNoise pure(1, OuParams{1.0, 0.0, 1.0}, 1);
  pure.set_state(std::vector<double>{1.0});
  CHECK(pure.step()[0] == 0.0);
  OuNoise still(1, OuParams{0.15, 0.0, 1.0}, 1);
  for (int i = 0; i < 10; ++i) CHECK(still.step()[0] == 0.0);

  // AR(1) with phi = 1 - theta: stationary variance sigma^2 / (1 - phi^2),
  // and the mean of n draws has variance about var (1 + phi) / ((1 - phi) n).
  const OuParams p{0.15, 0.2, 1.0};
  OuNoise noise(1, p, 2);
  const std::size_t n = 100000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += noise.step()[0];
  const double phi = 1.0 - p.theta;
  const double var = p.sigma * p.sigma / (1.0 - phi * phi);
  const double se = std::sqrt(var * (1.0 + phi) / ((1.0 - phi) * static_cast<double>(n)));
  CHECK(std::abs(sum / static_cast<double>(n)) < 3.0 * se);
}

TEST_CASE("soft target updates") {
  AgentConfig config = small_config({3});
  config.tau = 1.0;
  DdpgAgent agent(2, 1, config, 24);
  widen(agent.actor(), 25);
  agent.soft_update_targets();
  CHECK(params_of(agent.target_actor()) == params_of(agent.actor()));

  config.tau = 0.5;
  DdpgAgent half(2, 1, config, 26);
  const std::vector<double> before = params_of(half.target_actor());
  widen(half.actor(), 27);
  half.soft_update_targets();
  const std::vector<double> after = params_of(half.target_actor());
  const std::vector<double> primary = params_of(half.actor());
  for (std::size_t i = 0; i < after.size(); ++i) {
    CHECK(after[i] == doctest::Approx(0.5 * (before[i] + primary[i])).epsilon(1e-15));
  }
  config.tau = 0.0;
  CHECK_THROWS_AS(DdpgAgent(2, 1, config, 28), InvalidArgument);
}

TEST_CASE("replay ring") {
  ReplayMemory replay(3, 1, 1);
  for (int i = 0; i < 5; ++i) {
    replay.push(std::vector<double>{double(i)}, std::vector<double>{0.0}, double(i),
                std::vector<double>{0.0});
  }
  CHECK(replay.size() == 3);
  CHECK(replay.pushes() == 5);
  std::vector<double> rewards;
  for (std::size_t i = 0; i < 3; ++i) rewards.push_back(replay.reward(i));
  std::sort(rewards.begin(), rewards.end());
  CHECK(rewards == std::vector<double>{2.0, 3.0, 4.0});
  std::mt19937_64 rng(1);
  for (std::size_t i : replay.sample(3, rng)) CHECK(i < 3);
  CHECK_THROWS_AS(replay.sample(4, rng), InvalidArgument);
  CHECK_THROWS_AS(replay.push(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0}, 0.0,
                              std::vector<double>{0.0}),
                  InvalidArgument);
}

TEST_CASE("noise schedule") {
  AgentConfig config;
  CHECK(noise_schedule(config, 0, 300) == config.sigma_start);
  CHECK(noise_schedule(config, 299, 300) == doctest::Approx(config.sigma_end));
  CHECK(noise_schedule(config, 1000, 300) == doctest::Approx(config.sigma_end));
}

TEST_CASE("training") {
  CatalogSpec spec;
  spec.video_count = 20;
  auto catalog = std::make_shared<const SegmentCatalog>(build_catalog(spec, 1));
  EnvConfig env_config;
  env_config.users = 2;
  env_config.t_max = 20;
  const auto profiles = make_user_profiles(2, PqoeParams{}, DepartureModel{}, 1);

  auto run = [&](std::size_t episodes) {
    StreamingEnv env(catalog, ChannelModel{}, ComputeModel{}, env_config, profiles);
    TwinBank twins(2, TwinBankConfig{});
    DdpgAgent agent(env.state_dim(), env.action_dim(), small_config(), 3);
    TrainOptions options;
    options.episodes = episodes;
    options.seed = 5;
    std::size_t steps = 0;
    options.on_step = [&](std::size_t, const StepOutcome&) { ++steps; };
    auto curve = train(env, twins, agent, options);
    CHECK(steps == episodes * 20);
    return curve;
  };
  CHECK(run(0).empty());
  const auto a = run(6);
  const auto b = run(6);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mean_reward == b[i].mean_reward);
    CHECK(a[i].critic_loss == b[i].critic_loss);
    CHECK(a[i].actor_grad_norm == b[i].actor_grad_norm);
  }
  CHECK(a.back().critic_loss > 0.0);
}
