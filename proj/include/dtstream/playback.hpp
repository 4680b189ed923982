#pragma once

#include <cstddef>
#include <random>

#include "dtstream/catalog.hpp"
#include "dtstream/delay.hpp"

namespace dtstream {

struct UserPlaybackState {
  std::size_t video = 0;
  std::size_t next_segment = 0;  // 0-based; equals K_f once fully fetched
  double buffer_s = 0.0;
  int last_version = 0;  // 0 before the first delivery of a session
  double last_psnr_db = 0.0;
  double last_size_bits = 0.0;
  double last_rebuffer_s = 0.0;
  std::size_t slots_watched = 0;
  bool engaged = true;
};

// (B + e * delivered - d)^+
double update_buffer(double buffer_s, bool delivered, double segment_s, double slot_s);

// (D - B)^+
double rebuffer_time(double delay_s, double buffer_s);

// PSNR of the delivered version, 0 when nothing was delivered.
double segment_quality(const SegmentCatalog& catalog, const DeliveryDecision& decision);

// |l_now - l_prev| in levels; 0 for the first segment of a session or when
// nothing was delivered.
int quality_variation(int version_now, int version_prev);

// Parametric leave model. Per delivered segment the user abandons with
//   p = clip(base + per_rebuffer R + per_level H - quality (V - Vmin)/(Vmax - Vmin), 0, 1)
struct DepartureModel {
  double base = 0.01;
  double per_rebuffer_s = 0.3;
  double per_level = 0.05;
  double quality = 0.05;
  double v_min_db = 0.0;
  double v_max_db = 60.0;
};

double departure_probability(const DepartureModel& model, double rebuffer_s, double quality_db,
                             int variation);

bool maybe_depart(const DepartureModel& model, double rebuffer_s, double quality_db, int variation,
                  std::mt19937_64& rng);

}  // namespace dtstream
