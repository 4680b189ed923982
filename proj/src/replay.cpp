#include "dtstream/replay.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dtstream/errors.hpp"

namespace dtstream {

ReplayMemory::ReplayMemory(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0 || state_dim == 0 || action_dim == 0) {
    throw InvalidArgument("replay: capacity and dimensions must be positive");
  }
  states_.resize(capacity * state_dim);
  next_states_.resize(capacity * state_dim);
  actions_.resize(capacity * action_dim);
  rewards_.resize(capacity);
}

void ReplayMemory::push(std::span<const double> state, std::span<const double> action,
                        double reward, std::span<const double> next_state) {
  if (state.size() != state_dim_ || next_state.size() != state_dim_ ||
      action.size() != action_dim_) {
    throw InvalidArgument("replay: tuple dimensions do not match");
  }
  std::copy(state.begin(), state.end(), states_.begin() + head_ * state_dim_);
  std::copy(next_state.begin(), next_state.end(), next_states_.begin() + head_ * state_dim_);
  std::copy(action.begin(), action.end(), actions_.begin() + head_ * action_dim_);
  rewards_[head_] = reward;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++pushes_;
}

std::vector<std::size_t> ReplayMemory::sample(std::size_t n, std::mt19937_64& rng) const {
  if (n > size_) {
    throw InvalidArgument("replay: cannot sample " + std::to_string(n) + " of " +
                          std::to_string(size_) + " tuples");
  }
  std::vector<std::size_t> all(size_);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(n);
  std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
  return out;
}

void ReplayMemory::check(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay: index out of range");
}

std::span<const double> ReplayMemory::state(std::size_t i) const {
  check(i);
  return std::span<const double>(states_).subspan(i * state_dim_, state_dim_);
}

std::span<const double> ReplayMemory::action(std::size_t i) const {
  check(i);
  return std::span<const double>(actions_).subspan(i * action_dim_, action_dim_);
}

double ReplayMemory::reward(std::size_t i) const {
  check(i);
  return rewards_[i];
}

std::span<const double> ReplayMemory::next_state(std::size_t i) const {
  check(i);
  return std::span<const double>(next_states_).subspan(i * state_dim_, state_dim_);
}

}  // namespace dtstream
