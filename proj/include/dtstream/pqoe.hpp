#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dtstream {

// Memory length is measured in slots; alpha per dB, beta per version level,
// gamma per second of rebuffering.
struct PqoeParams {
  double lambda = 50.0;
  double alpha = 0.1;
  double beta = 0.5;
  double gamma = 1.0;

  void validate() const;
  bool operator==(const PqoeParams&) const = default;
};

struct SlotFactors {
  double quality_db = 0.0;
  double variation = 0.0;
  double rebuffer_s = 0.0;
  double slot = 0.0;        // t
  double final_slot = 0.0;  // p_u, with t <= p_u
};

// exp(-(p_u - t) / lambda)
double memory_factor(double lambda, double slot, double final_slot);

// exp(-(p_u - t) / lambda) * (alpha V - beta H - gamma R). Not clamped; heavy
// rebuffering makes it negative.
double pqoe_score(const PqoeParams& params, const SlotFactors& factors);

// Engagement-based reference 5 q / (K_f e + R_f), in [0, 5].
double reference_score(double engagement_s, std::size_t segment_count, double segment_s,
                       double total_rebuffer_s);

// Sum of per-slot scores over one viewing session.
double accumulate_session(const PqoeParams& params, std::span<const SlotFactors> series);

struct NormalizedPqoe {
  // [scheme][user], each user's best scheme at 1.0.
  std::vector<std::vector<double>> values;
  // Users whose totals were all <= 0; their row is emitted as zeros.
  std::vector<bool> degenerate_user;
};

// totals[scheme][user]. Each user's totals are divided by that user's
// maximum across schemes; negative ratios clamp to 0.
NormalizedPqoe normalize_pqoe(const std::vector<std::vector<double>>& totals);

}  // namespace dtstream
