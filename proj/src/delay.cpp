#include "dtstream/delay.hpp"

#include "dtstream/errors.hpp"

namespace dtstream {

std::string_view to_string(DeliveryCase c) {
  switch (c) {
    case DeliveryCase::kNone: return "none";
    case DeliveryCase::kEdgeHit: return "edge-hit";
    case DeliveryCase::kEdgeTranscode: return "edge-transcode";
    case DeliveryCase::kCloud: return "cloud";
  }
  return "unknown";
}

DeliveryCase classify_delivery(const SegmentCatalog& catalog, const DeliveryDecision& decision) {
  if (!decision.has_version()) return DeliveryCase::kNone;
  const auto f = decision.video;
  const auto k = decision.segment;
  if (catalog.cached(f, k, decision.version)) return DeliveryCase::kEdgeHit;
  if (decision.transcode && catalog.transcode_feasible(f, k, decision.version)) {
    return DeliveryCase::kEdgeTranscode;
  }
  return DeliveryCase::kCloud;
}

DelayBreakdown service_delay(const SegmentCatalog& catalog, const ChannelModel& channel,
                             const ComputeModel& compute, const DeliveryDecision& decision,
                             double snr) {
  DelayBreakdown out;
  out.delivery = classify_delivery(catalog, decision);
  if (out.delivery == DeliveryCase::kNone) return out;

  const double bits = catalog.segment_size(decision.video, decision.segment, decision.version);
  const double rate = tx_rate(channel, decision.bandwidth_share, snr);
  if (!(rate > 0.0)) {
    throw InfeasibleAllocation("segment scheduled for user " + std::to_string(decision.user) +
                               " with zero radio rate");
  }
  out.radio_s = bits / rate;
  if (out.delivery == DeliveryCase::kEdgeTranscode) {
    out.transcode_s = transcode_time(compute, bits, decision.compute_share);
  } else if (out.delivery == DeliveryCase::kCloud) {
    out.backhaul_s = bits / compute.backhaul_bps;
  }
  out.total_s = out.backhaul_s + out.transcode_s + out.radio_s;
  return out;
}

}  // namespace dtstream
