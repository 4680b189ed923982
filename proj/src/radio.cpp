#include "dtstream/radio.hpp"

#include <cmath>

#include "dtstream/errors.hpp"

namespace dtstream {

void ChannelModel::validate() const {
  if (!(bandwidth_hz > 0.0)) throw InvalidArgument("channel: bandwidth must be positive");
  if (!(cell_radius_m > 0.0)) throw InvalidArgument("channel: cell radius must be positive");
  if (!std::isfinite(tx_power_dbm) || !std::isfinite(noise_power_dbm) ||
      !std::isfinite(antenna_gain_db)) {
    throw InvalidArgument("channel: power levels must be finite");
  }
  if (!(shadowing_sigma_db >= 0.0)) throw InvalidArgument("channel: shadowing sigma must be >= 0");
}

void ComputeModel::validate() const {
  if (!(edge_capacity_cps > 0.0) || !(transcode_intensity_cpb > 0.0) || !(backhaul_bps > 0.0)) {
    throw InvalidArgument("compute: capacity, intensity and backhaul rate must be positive");
  }
}

double pathloss_db(double distance_m) {
  if (!(distance_m > 0.0)) throw InvalidArgument("channel: distance must be positive");
  return 128.1 + 37.6 * std::log10(distance_m / 1000.0);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double received_snr(const ChannelModel& model, double distance_m, double shadow_db) {
  if (!(distance_m > 0.0) || distance_m > model.cell_radius_m) {
    throw InvalidArgument("channel: distance outside (0, cell radius]");
  }
  const double snr_db = model.tx_power_dbm + model.antenna_gain_db - pathloss_db(distance_m) -
                        shadow_db - model.noise_power_dbm;
  return db_to_linear(snr_db);
}

double tx_rate(const ChannelModel& model, double bandwidth_share, double snr) {
  return bandwidth_share * model.bandwidth_hz * std::log2(1.0 + snr);
}

double transcode_time(const ComputeModel& model, double bits, double compute_share) {
  if (bits == 0.0) return 0.0;
  if (!(compute_share > 0.0)) {
    throw InfeasibleAllocation("transcoding scheduled with zero compute share");
  }
  return model.transcode_intensity_cpb * bits / (compute_share * model.edge_capacity_cps);
}

}  // namespace dtstream
