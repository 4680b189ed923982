#include "dtstream/ou_noise.hpp"

#include <algorithm>
#include <cmath>

#include "dtstream/errors.hpp"

namespace dtstream {

OuNoise::OuNoise(std::size_t dim, OuParams params, std::uint64_t seed)
    : params_(params), x_(dim, 0.0), rng_(seed) {
  if (!(params.theta >= 0.0) || !(params.sigma >= 0.0) || !(params.dt > 0.0)) {
    throw InvalidArgument("ou: need theta >= 0, sigma >= 0, dt > 0");
  }
}

std::span<const double> OuNoise::step() {
  const double diffusion = params_.sigma * std::sqrt(params_.dt);
  for (double& x : x_) {
    // Always draw so the stream does not depend on sigma.
    const double z = normal_(rng_);
    x += params_.theta * (0.0 - x) * params_.dt + diffusion * z;
  }
  return x_;
}

void OuNoise::reset() { std::fill(x_.begin(), x_.end(), 0.0); }

void OuNoise::set_sigma(double sigma) {
  if (!(sigma >= 0.0)) throw InvalidArgument("ou: sigma must be >= 0");
  params_.sigma = sigma;
}

void OuNoise::set_state(std::span<const double> x) {
  if (x.size() != x_.size()) throw InvalidArgument("ou: state size mismatch");
  std::copy(x.begin(), x.end(), x_.begin());
}

}  // namespace dtstream
