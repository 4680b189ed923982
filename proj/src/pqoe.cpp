#include "dtstream/pqoe.hpp"

#include <algorithm>
#include <cmath>

#include "dtstream/errors.hpp"

namespace dtstream {

void PqoeParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("pqoe: lambda must be > 0");
  for (double w : {alpha, beta, gamma}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("pqoe: weights must be >= 0");
  }
}

double memory_factor(double lambda, double slot, double final_slot) {
  return std::exp(-(final_slot - slot) / lambda);
}

double pqoe_score(const PqoeParams& params, const SlotFactors& factors) {
  const double impairment = params.alpha * factors.quality_db - params.beta * factors.variation -
                            params.gamma * factors.rebuffer_s;
  return memory_factor(params.lambda, factors.slot, factors.final_slot) * impairment;
}

double reference_score(double engagement_s, std::size_t segment_count, double segment_s,
                       double total_rebuffer_s) {
  const double length = static_cast<double>(segment_count) * segment_s;
  const double denom = length + total_rebuffer_s;
  if (!(denom > 0.0)) throw InvalidArgument("pqoe: reference score undefined for K_f e + R_f = 0");
  if (!(engagement_s >= 0.0) || !(total_rebuffer_s >= 0.0)) {
    throw InvalidArgument("pqoe: engagement and rebuffer time must be >= 0");
  }
  if (engagement_s > length * (1.0 + 1e-12)) {
    throw InvalidArgument("pqoe: engagement exceeds the video length");
  }
  return 5.0 * engagement_s / denom;
}

double accumulate_session(const PqoeParams& params, std::span<const SlotFactors> series) {
  double total = 0.0;
  for (const SlotFactors& f : series) total += pqoe_score(params, f);
  return total;
}

NormalizedPqoe normalize_pqoe(const std::vector<std::vector<double>>& totals) {
  NormalizedPqoe out;
  if (totals.empty()) return out;
  const std::size_t users = totals.front().size();
  for (const auto& row : totals) {
    if (row.size() != users) throw InvalidArgument("pqoe: ragged totals table");
  }
  out.values.assign(totals.size(), std::vector<double>(users, 0.0));
  out.degenerate_user.assign(users, false);
  for (std::size_t u = 0; u < users; ++u) {
    double best = -INFINITY;
    for (const auto& row : totals) best = std::max(best, row[u]);
    if (!(best > 0.0)) {
      out.degenerate_user[u] = true;
      continue;
    }
    for (std::size_t s = 0; s < totals.size(); ++s) {
      out.values[s][u] = std::clamp(totals[s][u] / best, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace dtstream
