#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dtstream {

struct OuParams {
  double theta = 0.15;
  double sigma = 0.2;
  double dt = 1.0;
};

// Ornstein-Uhlenbeck process around zero, one independent component per
// action dimension: x <- x - theta x dt + sigma sqrt(dt) N(0, 1).
class OuNoise {
 public:
  OuNoise(std::size_t dim, OuParams params, std::uint64_t seed);

  std::span<const double> step();
  void reset();

  void set_sigma(double sigma);
  void set_state(std::span<const double> x);
  const OuParams& params() const { return params_; }
  std::span<const double> state() const { return x_; }

 private:
  OuParams params_;
  std::vector<double> x_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dtstream
