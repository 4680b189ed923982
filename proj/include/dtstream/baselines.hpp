#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "dtstream/env.hpp"
#include "dtstream/twin.hpp"

namespace dtstream {

enum class PolicyKind { kRR, kPF, kJRAT, kCTRA, kDCTRA };

std::string_view to_string(PolicyKind kind);
// Accepts the names printed by to_string, case-insensitively.
PolicyKind parse_policy(std::string_view name);
// CTRA and DCTRA are trained; the others are fixed rules.
bool is_learned(PolicyKind kind);

// Round robin: up to `served` users with a segment left, chosen uniformly,
// equal compute and bandwidth shares, a uniformly random version each.
std::vector<DeliveryDecision> rr_decide(const StreamingEnv& env, std::mt19937_64& rng,
                                        std::size_t served = 3);

// Serves the `served` users of highest log2(1 + snr) / (B + 0.1 s) with equal
// shares. Each user gets the rounded mean of the versions it has received so
// far, or version 1 before its first delivery.
class ProportionalFair {
 public:
  explicit ProportionalFair(std::size_t users, std::size_t served = 3);

  std::vector<DeliveryDecision> decide(const StreamingEnv& env) const;
  void observe(const StepOutcome& outcome);

  static double priority(double snr, double buffer_s);
  int version_for(std::size_t user, std::size_t versions) const;

 private:
  std::size_t served_;
  std::vector<double> version_sum_;
  std::vector<std::size_t> version_count_;
};

// One-slot PQoE of user u under the twin's current parameters if it were
// given the shares `bandwidth` and `compute`, maximized over the L + 1
// version choices (including none) and, for uncached versions, over the
// cloud and transcode paths. Writes the maximizing decision to `best`.
double jrat_best_value(const StreamingEnv& env, const TwinBank& twins, std::size_t u,
                       double bandwidth, double compute, DeliveryDecision* best = nullptr);

// One-slot PQoE of a fully specified decision for user u.
double jrat_decision_value(const StreamingEnv& env, const TwinBank& twins,
                           const DeliveryDecision& decision);

// Greedy joint allocation: bandwidth and compute are cut into `increments`
// equal pieces; each round grants one piece to the user whose best one-slot
// PQoE rises most, until the pieces run out or no grant helps.
std::vector<DeliveryDecision> jrat_decide(const StreamingEnv& env, const TwinBank& twins,
                                          std::size_t increments = 12);

}  // namespace dtstream
