#pragma once

#include <cstddef>
#include <string_view>

#include "dtstream/catalog.hpp"
#include "dtstream/radio.hpp"

namespace dtstream {

enum class DeliveryCase { kNone, kEdgeHit, kEdgeTranscode, kCloud };

std::string_view to_string(DeliveryCase c);

// One user's decision for the current slot. At most one version, by
// construction; `transcode` may only be set when the version is not cached
// and the catalog says transcoding down to it is feasible.
struct DeliveryDecision {
  std::size_t user = 0;
  std::size_t video = 0;
  std::size_t segment = 0;
  int version = 0;  // 0: nothing requested
  bool transcode = false;
  double compute_share = 0.0;
  double bandwidth_share = 0.0;

  bool has_version() const { return version > 0; }
};

struct DelayBreakdown {
  DeliveryCase delivery = DeliveryCase::kNone;
  double backhaul_s = 0.0;
  double transcode_s = 0.0;
  double radio_s = 0.0;
  double total_s = 0.0;
};

// A transcode request that is not feasible falls through to the cloud case.
DeliveryCase classify_delivery(const SegmentCatalog& catalog, const DeliveryDecision& decision);

// Service delay of the three delivery cases:
//   edge hit        s / r_bs
//   edge transcode  mu s / (omega c) + s / r_bs
//   cloud           s / r_c + s / r_bs
// Throws InfeasibleAllocation when a chosen version has a zero radio rate or
// a transcode has no compute.
DelayBreakdown service_delay(const SegmentCatalog& catalog, const ChannelModel& channel,
                             const ComputeModel& compute, const DeliveryDecision& decision,
                             double snr);

}  // namespace dtstream
