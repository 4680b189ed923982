#include "dtstream/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dtstream/errors.hpp"

namespace dtstream {

void EnvConfig::validate() const {
  if (users == 0) throw InvalidArgument("env: need at least one user");
  if (!(slot_s > 0.0)) throw InvalidArgument("env: slot length must be positive");
  if (t_max == 0) throw InvalidArgument("env: t_max must be positive");
  if (!(mobility_sigma_m >= 0.0)) throw InvalidArgument("env: mobility sigma must be >= 0");
  if (!(min_distance_m > 0.0)) throw InvalidArgument("env: minimum distance must be positive");
  if (!(rebuffer_bound_s > 0.0) || !(buffer_bound_s > 0.0) || !(quality_bound_db > 0.0)) {
    throw InvalidArgument("env: feature bounds must be positive");
  }
  if (!(min_share >= 0.0 && min_share <= 1.0)) throw InvalidArgument("env: min_share must lie in [0, 1]");
}

std::vector<UserProfile> make_user_profiles(std::size_t users, const PqoeParams& prior,
                                            const DepartureModel& base, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<UserProfile> out(users);
  for (UserProfile& p : out) {
    // Memory lengths between 2 s and 13 s at 100 ms slots.
    p.perception.lambda = 20.0 * std::pow(130.0 / 20.0, unit(rng));
    p.perception.alpha = 0.05 + 0.15 * unit(rng);
    p.perception.beta = 0.2 + 0.8 * unit(rng);
    p.perception.gamma = 0.5 + 1.5 * unit(rng);
    p.departure = base;
    p.departure.quality = base.quality * p.perception.alpha / prior.alpha;
    p.departure.per_level = base.per_level * p.perception.beta / prior.beta;
    p.departure.per_rebuffer_s = base.per_rebuffer_s * p.perception.gamma / prior.gamma;
  }
  return out;
}

std::uint64_t episode_seed(std::uint64_t base, std::size_t episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

double map_tanh(double x, std::size_t& clamped) {
  if (x < -1.0 || x > 1.0 || std::isnan(x)) {
    ++clamped;
    x = std::isnan(x) ? 0.0 : std::clamp(x, -1.0, 1.0);
  }
  return (x + 1.0) / 2.0;
}

double map_tanh(double x) {
  std::size_t ignored = 0;
  return map_tanh(x, ignored);
}

int version_bin(double raw, std::size_t versions) {
  const double bins = static_cast<double>(versions + 1);
  int version = 0;
  for (std::size_t j = 1; j <= versions; ++j) {
    if (raw >= static_cast<double>(j) / bins) version = static_cast<int>(j);
  }
  return version;
}

bool transcode_bin(double raw) { return raw >= 0.5; }

void check_constraints(const SegmentCatalog& catalog, std::span<const DeliveryDecision> decisions) {
  constexpr double kSumTolerance = 1e-12;
  double compute_sum = 0.0;
  double bandwidth_sum = 0.0;
  for (const DeliveryDecision& d : decisions) {
    const std::string who = "user " + std::to_string(d.user) + ": ";
    if (d.version < 0 || static_cast<std::size_t>(d.version) > catalog.version_count()) {
      throw ConstraintViolation(who + "version outside 0..L");
    }
    if (!(d.compute_share >= 0.0 && d.compute_share <= 1.0) ||
        !(d.bandwidth_share >= 0.0 && d.bandwidth_share <= 1.0)) {
      throw ConstraintViolation(who + "share outside [0, 1]");
    }
    if (d.transcode) {
      if (!d.has_version()) throw ConstraintViolation(who + "transcode without a version");
      if (catalog.cached(d.video, d.segment, d.version)) {
        throw ConstraintViolation(who + "transcode of a cached version");
      }
      if (!catalog.transcode_feasible(d.video, d.segment, d.version)) {
        throw ConstraintViolation(who + "transcode target larger than every cached version");
      }
      if (!(d.compute_share > 0.0)) throw ConstraintViolation(who + "transcode without compute");
    }
    if (d.has_version() && !(d.bandwidth_share > 0.0)) {
      throw ConstraintViolation(who + "segment scheduled without bandwidth");
    }
    compute_sum += d.compute_share;
    bandwidth_sum += d.bandwidth_share;
  }
  if (compute_sum > 1.0 + kSumTolerance) throw ConstraintViolation("compute shares exceed 1");
  if (bandwidth_sum > 1.0 + kSumTolerance) throw ConstraintViolation("bandwidth shares exceed 1");
}

namespace {

// Repeated subtraction of the slot length leaves rounding residue; a buffer
// below this counts as drained.
constexpr double kDrainedBuffer = 1e-9;

}  // namespace

StreamingEnv::StreamingEnv(std::shared_ptr<const SegmentCatalog> catalog, ChannelModel channel,
                           ComputeModel compute, EnvConfig config,
                           std::vector<UserProfile> profiles)
    : catalog_(std::move(catalog)),
      channel_(channel),
      compute_(compute),
      config_(config),
      profiles_(std::move(profiles)) {
  if (!catalog_) throw InvalidArgument("env: catalog is required");
  channel_.validate();
  compute_.validate();
  config_.validate();
  if (profiles_.size() != config_.users) throw InvalidArgument("env: one profile per user");
  for (UserProfile& p : profiles_) {
    p.perception.validate();
    p.departure.v_min_db = catalog_->min_psnr();
    p.departure.v_max_db = catalog_->max_psnr();
  }
  if (config_.min_distance_m >= channel_.cell_radius_m) {
    throw InvalidArgument("env: minimum distance must be below the cell radius");
  }
  users_.resize(config_.users);
}

std::vector<double> StreamingEnv::reset(std::uint64_t seed) {
  episode_ = started_ ? episode_ + 1 : 0;
  started_ = true;
  slot_ = 0;
  rng_.seed(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (UserSim& u : users_) {
    const double r = std::max(channel_.cell_radius_m * std::sqrt(unit(rng_)), config_.min_distance_m);
    const double angle = 2.0 * std::numbers::pi * unit(rng_);
    u.x = r * std::cos(angle);
    u.y = r * std::sin(angle);
    start_session(u);
    refresh_snr(u);
  }
  return observe();
}

void StreamingEnv::start_session(UserSim& user) {
  user.play = UserPlaybackState{};
  user.play.video = catalog_->sample_video(rng_);
  user.session_start = slot_;
  user.session_rebuffer = 0.0;
  user.series.clear();
}

void StreamingEnv::refresh_snr(UserSim& user) {
  double shadow = 0.0;
  if (channel_.shadowing) {
    std::normal_distribution<double> normal(0.0, channel_.shadowing_sigma_db);
    shadow = normal(rng_);
  }
  const double d = std::clamp(std::hypot(user.x, user.y), config_.min_distance_m,
                              channel_.cell_radius_m);
  user.snr = received_snr(channel_, d, shadow);
}

void StreamingEnv::move(UserSim& user) {
  if (!config_.mobility || config_.mobility_sigma_m == 0.0) return;
  std::normal_distribution<double> normal(0.0, config_.mobility_sigma_m);
  user.x += normal(rng_);
  user.y += normal(rng_);
  const double radius = channel_.cell_radius_m;
  const double r = std::hypot(user.x, user.y);
  if (r > radius) {
    // Reflect radially at the cell edge.
    const double scale = (2.0 * radius - r) / r;
    user.x *= scale;
    user.y *= scale;
  }
}

double StreamingEnv::distance(std::size_t u) const {
  const UserSim& user = users_.at(u);
  return std::clamp(std::hypot(user.x, user.y), config_.min_distance_m, channel_.cell_radius_m);
}

bool StreamingEnv::active(std::size_t u) const {
  const UserPlaybackState& p = users_.at(u).play;
  return p.engaged && p.next_segment < catalog_->segment_count(p.video);
}

double StreamingEnv::session_slot(std::size_t u) const {
  return static_cast<double>(slot_ - users_.at(u).session_start);
}

double StreamingEnv::final_slot(std::size_t u) const {
  // Slot in which playback would end if it ran without further stalls from
  // the current buffer plus every segment not yet fetched.
  const UserPlaybackState& p = users_.at(u).play;
  const std::size_t segments = catalog_->segment_count(p.video);
  const double remaining = p.buffer_s + static_cast<double>(segments - std::min(p.next_segment, segments)) *
                                            catalog_->segment_duration(p.video);
  const double t = session_slot(u);
  return std::max(t, t + std::round(remaining / config_.slot_s) - 1.0);
}

DeliveryDecision StreamingEnv::blank_decision(std::size_t u) const {
  const UserPlaybackState& p = users_.at(u).play;
  DeliveryDecision d;
  d.user = u;
  d.video = p.video;
  d.segment = std::min(p.next_segment, catalog_->segment_count(p.video) - 1);
  return d;
}

std::vector<double> StreamingEnv::observe() const {
  const std::size_t n = config_.users;
  std::vector<double> s(5 * n, 0.0);
  const double versions = static_cast<double>(catalog_->version_count());
  for (std::size_t u = 0; u < n; ++u) {
    const UserPlaybackState& p = users_[u].play;
    s[u] = std::min(p.last_rebuffer_s / config_.rebuffer_bound_s, 1.0);
    s[n + u] = std::min(p.buffer_s / config_.buffer_bound_s, 1.0);
    s[2 * n + u] = static_cast<double>(p.last_version) / versions;
    s[3 * n + u] = std::min(p.last_psnr_db / config_.quality_bound_db, 1.0);
    s[4 * n + u] = std::min(p.last_size_bits / catalog_->max_segment_size(), 1.0);
  }
  return s;
}

std::vector<DeliveryDecision> StreamingEnv::decode_action(std::span<const double> raw) const {
  const std::size_t n = config_.users;
  if (raw.size() != 4 * n) throw InvalidArgument("env: action has wrong length");
  auto at = [&](std::size_t u, std::size_t field) { return std::clamp(raw[4 * u + field], 0.0, 1.0); };

  // Only users that receive a segment hold bandwidth, and only transcoding
  // users hold compute, so the sums run over those users alone.
  std::vector<DeliveryDecision> out;
  out.reserve(n);
  double compute_sum = 0.0;
  double bandwidth_sum = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    DeliveryDecision d = blank_decision(u);
    d.version = active(u) ? version_bin(at(u, 0), catalog_->version_count()) : 0;
    if (d.has_version()) {
      bandwidth_sum += at(u, 3);
      d.transcode = !catalog_->cached(d.video, d.segment, d.version) && transcode_bin(at(u, 1)) &&
                    catalog_->transcode_feasible(d.video, d.segment, d.version);
      if (d.transcode) compute_sum += at(u, 2);
    }
    out.push_back(d);
  }
  const double compute_scale = compute_sum > 1.0 ? 1.0 / compute_sum : 1.0;
  const double bandwidth_scale = bandwidth_sum > 1.0 ? 1.0 / bandwidth_sum : 1.0;

  for (std::size_t u = 0; u < n; ++u) {
    DeliveryDecision& d = out[u];
    if (!d.has_version()) continue;
    const double xi = std::min(at(u, 3) * bandwidth_scale, 1.0);
    if (!(xi > 0.0 && xi >= config_.min_share)) {
      d = blank_decision(u);
      continue;
    }
    d.bandwidth_share = xi;
    if (d.transcode) {
      const double omega = std::min(at(u, 2) * compute_scale, 1.0);
      if (omega > 0.0 && omega >= config_.min_share) {
        d.compute_share = omega;
      } else {
        d.transcode = false;
      }
    }
  }
  return out;
}

StepOutcome StreamingEnv::step(std::span<const DeliveryDecision> decisions, TwinBank& twins) {
  if (!started_) throw InvalidArgument("env: step before reset");
  if (done()) throw InvalidArgument("env: episode already finished");
  if (decisions.size() != config_.users) throw InvalidArgument("env: one decision per user");
  if (twins.size() != config_.users) throw InvalidArgument("env: one twin per user");
  check_constraints(*catalog_, decisions);
  ++constraint_checks_;

  StepOutcome out;
  out.slot = slot_;
  out.users.resize(config_.users);
  const double d = config_.slot_s;

  for (std::size_t u = 0; u < config_.users; ++u) {
    UserSim& user = users_[u];
    const DeliveryDecision& dec = decisions[u];
    if (dec.user != u) throw InvalidArgument("env: decisions must be ordered by user");
    UserSlotRecord& rec = out.users[u];
    rec.user = u;
    rec.video = user.play.video;
    rec.buffer_before_s = user.play.buffer_s;
    const double projected_end = final_slot(u);

    const std::size_t f = user.play.video;
    const double e = catalog_->segment_duration(f);
    const bool delivered = dec.has_version();
    if (delivered) {
      if (!active(u) || dec.video != f || dec.segment != user.play.next_segment) {
        throw InvalidArgument("env: decision for user " + std::to_string(u) +
                              " does not target its next segment");
      }
      rec.delay = service_delay(*catalog_, channel_, compute_, dec, user.snr);
      rec.segment = dec.segment + 1;
      rec.version = dec.version;
      rec.rebuffer_s = rebuffer_time(rec.delay.total_s, user.play.buffer_s);
      rec.quality_db = segment_quality(*catalog_, dec);
      rec.variation = quality_variation(dec.version, user.play.last_version);
      user.play.last_version = dec.version;
      user.play.last_psnr_db = rec.quality_db;
      user.play.last_size_bits = catalog_->segment_size(f, dec.segment, dec.version);
      ++user.play.next_segment;
    }
    user.play.last_rebuffer_s = rec.rebuffer_s;
    user.play.buffer_s = update_buffer(user.play.buffer_s, delivered, e, d);
    rec.buffer_s = user.play.buffer_s;
    ++user.play.slots_watched;

    rec.factors.quality_db = rec.quality_db;
    rec.factors.variation = static_cast<double>(rec.variation);
    rec.factors.rebuffer_s = rec.rebuffer_s;
    rec.factors.slot = session_slot(u);
    rec.factors.final_slot = projected_end;
    rec.pqoe = pqoe_score(twins.params(u), rec.factors);
    rec.perceived = pqoe_score(profiles_[u].perception, rec.factors);
    user.series.push_back(rec.factors);
    user.session_rebuffer += rec.rebuffer_s;

    double term = rec.pqoe;
    if (config_.reward_scaling) {
      user.reward_min = std::min(user.reward_min, rec.pqoe);
      user.reward_max = std::max(user.reward_max, rec.pqoe);
      const double span = user.reward_max - user.reward_min;
      term = span > 0.0 ? (rec.pqoe - user.reward_min) / span : 0.0;
    }
    out.reward += term;
    out.perceived += rec.perceived;

    if (delivered && config_.departures) {
      rec.departed = maybe_depart(profiles_[u].departure, rec.rebuffer_s, rec.quality_db,
                                  rec.variation, rng_);
    }
    const std::size_t segments = catalog_->segment_count(f);
    rec.completed = !rec.departed && user.play.next_segment >= segments &&
                    user.play.buffer_s <= kDrainedBuffer;
    rec.engaged = !(rec.departed || rec.completed);
    if (!rec.engaged) {
      UdtRecord session;
      session.video = f;
      session.series = user.series;
      const double end = rec.factors.slot;
      for (SlotFactors& s : session.series) s.final_slot = end;
      const double length = static_cast<double>(segments) * e;
      session.engagement_s =
          std::min(static_cast<double>(user.play.slots_watched) * d, length);
      session.total_rebuffer_s = user.session_rebuffer;
      session.segment_count = segments;
      session.segment_duration_s = e;
      session.completed = rec.completed;
      twins.on_session(u, std::move(session), episode_);
    }
  }

  ++slot_;
  for (std::size_t u = 0; u < config_.users; ++u) {
    UserSim& user = users_[u];
    if (!out.users[u].engaged) start_session(user);
    move(user);
    refresh_snr(user);
  }
  out.done = done();
  if (out.done) twins.on_episode_end(episode_);
  out.next_state = observe();
  return out;
}

}  // namespace dtstream
