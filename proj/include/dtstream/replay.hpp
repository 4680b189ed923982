#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace dtstream {

// Fixed-capacity ring of (s, a, r, s') tuples stored in flat arrays. Once
// full, each push overwrites the oldest tuple.
class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(std::span<const double> state, std::span<const double> action, double reward,
            std::span<const double> next_state);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t pushes() const { return pushes_; }

  // n distinct slots, uniformly at random. Throws if n > size().
  std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

  std::span<const double> state(std::size_t i) const;
  std::span<const double> action(std::size_t i) const;
  double reward(std::size_t i) const;
  std::span<const double> next_state(std::size_t i) const;

 private:
  void check(std::size_t i) const;

  std::size_t capacity_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  std::size_t pushes_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
};

}  // namespace dtstream
