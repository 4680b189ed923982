#pragma once

// Synthetic viewing sessions with a known perception model. Each session's
// engagement time is chosen so that the engagement-based reference equals
// the session's accumulated score under `truth` (times a multiplicative
// noise factor), which makes `truth` an exact zero of the fit objective when
// the noise is off.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dtstream/pqoe.hpp"
#include "dtstream/twin.hpp"

namespace dtstream::testing {

inline std::vector<UdtRecord> synthetic_sessions(const PqoeParams& truth, std::size_t count,
                                                 std::uint64_t seed, double noise = 0.0) {
  const std::size_t segments = 10;
  const double segment_s = 1.0;
  const double length = static_cast<double>(segments) * segment_s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<UdtRecord> out;
  while (out.size() < count) {
    UdtRecord rec;
    rec.segment_count = segments;
    rec.segment_duration_s = segment_s;
    const std::size_t final_slot = 20 + static_cast<std::size_t>(unit(rng) * 60.0);
    const std::size_t slots = 4 + static_cast<std::size_t>(unit(rng) * 8.0);
    std::vector<std::size_t> at;
    while (at.size() < slots) {
      const auto t = static_cast<std::size_t>(unit(rng) * static_cast<double>(final_slot + 1));
      if (std::find(at.begin(), at.end(), std::min(t, final_slot)) == at.end()) {
        at.push_back(std::min(t, final_slot));
      }
    }
    std::sort(at.begin(), at.end());
    for (std::size_t t : at) {
      SlotFactors f;
      f.slot = static_cast<double>(t);
      f.final_slot = static_cast<double>(final_slot);
      f.quality_db = 28.0 + 14.0 * unit(rng);
      f.variation = std::floor(4.0 * unit(rng));
      f.rebuffer_s = unit(rng) < 0.4 ? 1.2 * unit(rng) : 0.0;
      rec.total_rebuffer_s += f.rebuffer_s;
      rec.series.push_back(f);
    }
    double z = accumulate_session(truth, rec.series);
    if (noise > 0.0) z *= 1.0 + noise * gauss(rng);
    const double engagement = z * (length + rec.total_rebuffer_s) / 5.0;
    if (!(engagement > 0.02 * length) || engagement > length) continue;
    rec.engagement_s = engagement;
    rec.completed = engagement >= length;
    rec.reference = reference_score(engagement, segments, segment_s, rec.total_rebuffer_s);
    out.push_back(std::move(rec));
  }
  return out;
}

inline double relative_error(double got, double want) { return std::abs(got - want) / std::abs(want); }

inline double worst_relative_error(const PqoeParams& got, const PqoeParams& want) {
  return std::max({relative_error(got.lambda, want.lambda), relative_error(got.alpha, want.alpha),
                   relative_error(got.beta, want.beta), relative_error(got.gamma, want.gamma)});
}

// Generators spread over plausible users, one per index.
inline PqoeParams synthetic_truth(std::size_t user) {
  static const PqoeParams table[] = {
      {25.0, 0.012, 0.15, 0.9}, {40.0, 0.010, 0.30, 0.5}, {15.0, 0.018, 0.10, 1.4},
      {60.0, 0.008, 0.20, 0.7}, {30.0, 0.015, 0.05, 1.1}, {20.0, 0.011, 0.25, 0.6},
  };
  return table[user % (sizeof(table) / sizeof(table[0]))];
}

}  // namespace dtstream::testing
