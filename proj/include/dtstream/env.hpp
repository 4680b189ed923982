#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "dtstream/catalog.hpp"
#include "dtstream/delay.hpp"
#include "dtstream/playback.hpp"
#include "dtstream/pqoe.hpp"
#include "dtstream/radio.hpp"
#include "dtstream/twin.hpp"

namespace dtstream {

struct EnvConfig {
  std::size_t users = 12;
  double slot_s = 0.1;
  std::size_t t_max = 100;

  bool departures = true;
  bool mobility = true;
  double mobility_sigma_m = 1.0;
  double min_distance_m = 35.0;

  // Fixed scaling bounds of the observation features.
  double rebuffer_bound_s = 2.0;
  double buffer_bound_s = 10.0;
  double quality_bound_db = 60.0;

  // Per-user running min-max scaling of the reward terms.
  bool reward_scaling = false;

  // Smallest share the action decoder grants. A bandwidth share below it
  // schedules nothing and a compute share below it sends the segment down
  // the cloud path instead of transcoding.
  double min_share = 0.01;

  void validate() const;
};

// Hidden per-user ground truth: how the user actually perceives playback,
// and the abandonment behaviour that follows from it.
struct UserProfile {
  PqoeParams perception;
  DepartureModel departure;
};

// Draws heterogeneous profiles. Departure coefficients are the defaults of
// `base` scaled by the user's sensitivity relative to `prior`, so a user
// whose perception equals the prior gets exactly `base`.
std::vector<UserProfile> make_user_profiles(std::size_t users, const PqoeParams& prior,
                                            const DepartureModel& base, std::uint64_t seed);

// Seed of episode `episode` in a run seeded with `base`. Every scheme run with
// the same base sees the same sequence of initial placements and requests.
std::uint64_t episode_seed(std::uint64_t base, std::size_t episode);

// Maps a tanh output from [-1, 1] to [0, 1]. Inputs outside [-1, 1] are
// clamped and counted.
double map_tanh(double x);
double map_tanh(double x, std::size_t& clamped);

// Version bin of a raw selector in [0, 1]: L + 1 equal closed-left bins,
// the first meaning "no segment". For L = 4 the edges are 0.2, 0.4, 0.6, 0.8.
int version_bin(double raw, std::size_t versions);

// Transcode selector: [0, 0.5) no, [0.5, 1] yes.
bool transcode_bin(double raw);

// Throws ConstraintViolation unless the decision set satisfies: at most one
// version per user, transcoding only towards a smaller-or-equal cached
// version that is not itself cached, sum of compute shares <= 1 and sum of
// bandwidth shares <= 1, every share in [0, 1], and nonzero bandwidth for
// every scheduled segment.
void check_constraints(const SegmentCatalog& catalog, std::span<const DeliveryDecision> decisions);

struct UserSlotRecord {
  std::size_t user = 0;
  std::size_t video = 0;
  std::size_t segment = 0;  // 1-based index of the delivered segment, 0 if none
  int version = 0;
  DelayBreakdown delay;
  double buffer_before_s = 0.0;
  double buffer_s = 0.0;  // after the buffer update
  double rebuffer_s = 0.0;
  double quality_db = 0.0;
  int variation = 0;
  SlotFactors factors;
  double pqoe = 0.0;       // with the twin's parameters (reward term)
  double perceived = 0.0;  // with the user's hidden profile
  bool departed = false;
  bool completed = false;
  bool engaged = true;  // still watching the same video after this slot
};

struct StepOutcome {
  std::vector<double> next_state;
  double reward = 0.0;
  double perceived = 0.0;
  std::vector<UserSlotRecord> users;
  std::size_t slot = 0;
  bool done = false;
};

class StreamingEnv {
 public:
  StreamingEnv(std::shared_ptr<const SegmentCatalog> catalog, ChannelModel channel,
               ComputeModel compute, EnvConfig config, std::vector<UserProfile> profiles);

  // Starts an episode: users uniformly placed in the cell, empty buffers,
  // fresh video requests. Twins live outside and persist.
  std::vector<double> reset(std::uint64_t seed);

  // Per-feature blocks R, B, l, V, size, each of length U, scaled to [0, 1].
  std::vector<double> observe() const;

  std::size_t users() const { return config_.users; }
  std::size_t state_dim() const { return 5 * config_.users; }
  std::size_t action_dim() const { return 4 * config_.users; }

  // Raw action layout per user: (g, o, omega, xi), each in [0, 1]. Users
  // without a segment hold no bandwidth and users not transcoding hold no
  // compute; the remaining shares are divided by their sum when it exceeds 1.
  std::vector<DeliveryDecision> decode_action(std::span<const double> raw) const;

  StepOutcome step(std::span<const DeliveryDecision> decisions, TwinBank& twins);

  const SegmentCatalog& catalog() const { return *catalog_; }
  std::shared_ptr<const SegmentCatalog> shared_catalog() const { return catalog_; }
  const ChannelModel& channel() const { return channel_; }
  const ComputeModel& compute() const { return compute_; }
  const EnvConfig& config() const { return config_; }
  const UserProfile& profile(std::size_t u) const { return profiles_.at(u); }

  const UserPlaybackState& playback(std::size_t u) const { return users_.at(u).play; }
  double snr(std::size_t u) const { return users_.at(u).snr; }
  double distance(std::size_t u) const;
  // Has a segment left to request in the current video.
  bool active(std::size_t u) const;
  // Slot index within the current session, and the slot in which playback
  // ends if nothing stalls from here on (p_u). Stalls push p_u later.
  double session_slot(std::size_t u) const;
  double final_slot(std::size_t u) const;
  // Decision skeleton for user u's next segment (no version, zero shares).
  DeliveryDecision blank_decision(std::size_t u) const;

  std::size_t slot() const { return slot_; }
  std::size_t episode() const { return episode_; }
  bool done() const { return slot_ >= config_.t_max; }
  std::size_t constraint_checks() const { return constraint_checks_; }

 private:
  struct UserSim {
    UserPlaybackState play;
    double x = 0.0;
    double y = 0.0;
    double snr = 0.0;
    std::size_t session_start = 0;
    double session_rebuffer = 0.0;
    std::vector<SlotFactors> series;
    double reward_min = INFINITY;
    double reward_max = -INFINITY;
  };

  void start_session(UserSim& user);
  void refresh_snr(UserSim& user);
  void move(UserSim& user);

  std::shared_ptr<const SegmentCatalog> catalog_;
  ChannelModel channel_;
  ComputeModel compute_;
  EnvConfig config_;
  std::vector<UserProfile> profiles_;
  std::vector<UserSim> users_;
  std::mt19937_64 rng_;
  std::size_t slot_ = 0;
  std::size_t episode_ = 0;
  bool started_ = false;
  std::size_t constraint_checks_ = 0;
};

}  // namespace dtstream
