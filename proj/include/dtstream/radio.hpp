#pragma once

namespace dtstream {

struct ChannelModel {
  double bandwidth_hz = 200e6;
  double tx_power_dbm = 25.0;
  double noise_power_dbm = -82.0;
  // Fixed antenna/beamforming gain added to the link budget.
  double antenna_gain_db = 20.0;
  double cell_radius_m = 600.0;
  bool shadowing = false;
  double shadowing_sigma_db = 4.0;

  void validate() const;
};

struct ComputeModel {
  double edge_capacity_cps = 1e9;       // cycles per second
  double transcode_intensity_cpb = 10;  // cycles per bit
  double backhaul_bps = 200e6;

  void validate() const;
};

// 128.1 + 37.6 log10(d / 1 km), in dB.
double pathloss_db(double distance_m);

double db_to_linear(double db);

// Linear P/N_o at the given distance. Throws InvalidArgument unless
// 0 < distance <= cell radius.
double received_snr(const ChannelModel& model, double distance_m, double shadow_db = 0.0);

// xi * W * log2(1 + snr), in bits per second.
double tx_rate(const ChannelModel& model, double bandwidth_share, double snr);

// mu * bits / (omega * c). Throws InfeasibleAllocation for omega = 0 with
// bits > 0.
double transcode_time(const ComputeModel& model, double bits, double compute_share);

}  // namespace dtstream
