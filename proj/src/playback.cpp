#include "dtstream/playback.hpp"

#include <algorithm>
#include <cstdlib>

namespace dtstream {

double update_buffer(double buffer_s, bool delivered, double segment_s, double slot_s) {
  return std::max(buffer_s + (delivered ? segment_s : 0.0) - slot_s, 0.0);
}

double rebuffer_time(double delay_s, double buffer_s) {
  return std::max(delay_s - buffer_s, 0.0);
}

double segment_quality(const SegmentCatalog& catalog, const DeliveryDecision& decision) {
  if (!decision.has_version()) return 0.0;
  return catalog.psnr(decision.video, decision.segment, decision.version);
}

int quality_variation(int version_now, int version_prev) {
  if (version_now <= 0 || version_prev <= 0) return 0;
  return std::abs(version_now - version_prev);
}

double departure_probability(const DepartureModel& model, double rebuffer_s, double quality_db,
                             int variation) {
  const double span = model.v_max_db - model.v_min_db;
  const double normalized = span > 0.0 ? (quality_db - model.v_min_db) / span : 1.0;
  const double p = model.base + model.per_rebuffer_s * rebuffer_s +
                   model.per_level * static_cast<double>(variation) - model.quality * normalized;
  return std::clamp(p, 0.0, 1.0);
}

bool maybe_depart(const DepartureModel& model, double rebuffer_s, double quality_db, int variation,
                  std::mt19937_64& rng) {
  const double p = departure_probability(model, rebuffer_s, quality_db, variation);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Always draw so the stream position does not depend on p.
  const double u = unit(rng);
  return u < p;
}

}  // namespace dtstream
