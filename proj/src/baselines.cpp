#include "dtstream/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iterator>
#include <string>

#include "dtstream/delay.hpp"
#include "dtstream/errors.hpp"
#include "dtstream/playback.hpp"
#include "dtstream/pqoe.hpp"

namespace dtstream {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kRR:
      return "RR";
    case PolicyKind::kPF:
      return "PF";
    case PolicyKind::kJRAT:
      return "JRAT";
    case PolicyKind::kCTRA:
      return "CTRA";
    case PolicyKind::kDCTRA:
      return "DCTRA";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (PolicyKind k : {PolicyKind::kRR, PolicyKind::kPF, PolicyKind::kJRAT, PolicyKind::kCTRA,
                       PolicyKind::kDCTRA}) {
    if (upper == to_string(k)) return k;
  }
  throw InvalidArgument("unknown scheme '" + std::string(name) + "'");
}

bool is_learned(PolicyKind kind) { return kind == PolicyKind::kCTRA || kind == PolicyKind::kDCTRA; }

namespace {

std::vector<std::size_t> active_users(const StreamingEnv& env) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < env.users(); ++u) {
    if (env.active(u)) out.push_back(u);
  }
  return out;
}

// Fills in the delivery path for a chosen version: edge hit when cached,
// edge transcode when possible, otherwise the cloud.
void route(const StreamingEnv& env, DeliveryDecision& d, double compute) {
  d.transcode = false;
  d.compute_share = 0.0;
  if (!d.has_version()) return;
  const SegmentCatalog& cat = env.catalog();
  if (!cat.cached(d.video, d.segment, d.version) && compute > 0.0 &&
      cat.transcode_feasible(d.video, d.segment, d.version)) {
    d.transcode = true;
    d.compute_share = compute;
  }
}

}  // namespace

std::vector<DeliveryDecision> rr_decide(const StreamingEnv& env, std::mt19937_64& rng,
                                        std::size_t served) {
  std::vector<DeliveryDecision> out;
  for (std::size_t u = 0; u < env.users(); ++u) out.push_back(env.blank_decision(u));
  std::vector<std::size_t> candidates = active_users(env);
  const std::size_t n = std::min(served, candidates.size());
  if (n == 0) return out;
  std::vector<std::size_t> chosen;
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen), n, rng);
  const double share = 1.0 / static_cast<double>(n);
  std::uniform_int_distribution<int> version(1, static_cast<int>(env.catalog().version_count()));
  for (std::size_t u : chosen) {
    DeliveryDecision& d = out[u];
    d.version = version(rng);
    d.bandwidth_share = share;
    route(env, d, share);
  }
  return out;
}

ProportionalFair::ProportionalFair(std::size_t users, std::size_t served)
    : served_(served), version_sum_(users, 0.0), version_count_(users, 0) {}

double ProportionalFair::priority(double snr, double buffer_s) {
  return std::log2(1.0 + snr) / (buffer_s + 0.1);
}

int ProportionalFair::version_for(std::size_t user, std::size_t versions) const {
  if (version_count_.at(user) == 0) return 1;
  const double mean = version_sum_[user] / static_cast<double>(version_count_[user]);
  return std::clamp(static_cast<int>(std::lround(mean)), 1, static_cast<int>(versions));
}

std::vector<DeliveryDecision> ProportionalFair::decide(const StreamingEnv& env) const {
  std::vector<DeliveryDecision> out;
  for (std::size_t u = 0; u < env.users(); ++u) out.push_back(env.blank_decision(u));
  std::vector<std::size_t> candidates = active_users(env);
  // Stable order keeps ties deterministic: lower user index first.
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return priority(env.snr(a), env.playback(a).buffer_s) >
           priority(env.snr(b), env.playback(b).buffer_s);
  });
  const std::size_t n = std::min(served_, candidates.size());
  if (n == 0) return out;
  const double share = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    DeliveryDecision& d = out[candidates[i]];
    d.version = version_for(candidates[i], env.catalog().version_count());
    d.bandwidth_share = share;
    route(env, d, share);
  }
  return out;
}

void ProportionalFair::observe(const StepOutcome& outcome) {
  for (const UserSlotRecord& rec : outcome.users) {
    if (rec.version > 0) {
      version_sum_.at(rec.user) += rec.version;
      ++version_count_[rec.user];
    }
  }
}

double jrat_decision_value(const StreamingEnv& env, const TwinBank& twins,
                           const DeliveryDecision& decision) {
  if (!decision.has_version()) return 0.0;
  const std::size_t u = decision.user;
  const UserPlaybackState& play = env.playback(u);
  const DelayBreakdown delay =
      service_delay(env.catalog(), env.channel(), env.compute(), decision, env.snr(u));
  SlotFactors f;
  f.quality_db = segment_quality(env.catalog(), decision);
  f.variation = quality_variation(decision.version, play.last_version);
  f.rebuffer_s = rebuffer_time(delay.total_s, play.buffer_s);
  f.slot = env.session_slot(u);
  f.final_slot = env.final_slot(u);
  return pqoe_score(twins.params(u), f);
}

double jrat_best_value(const StreamingEnv& env, const TwinBank& twins, std::size_t u,
                       double bandwidth, double compute, DeliveryDecision* best) {
  DeliveryDecision chosen = env.blank_decision(u);
  double value = 0.0;
  if (env.active(u) && bandwidth > 0.0) {
    const SegmentCatalog& cat = env.catalog();
    for (int l = 1; l <= static_cast<int>(cat.version_count()); ++l) {
      DeliveryDecision d = env.blank_decision(u);
      d.version = l;
      d.bandwidth_share = bandwidth;
      // Edge hit or cloud.
      const double direct = jrat_decision_value(env, twins, d);
      if (direct > value) {
        value = direct;
        chosen = d;
      }
      if (compute > 0.0 && !cat.cached(d.video, d.segment, l) &&
          cat.transcode_feasible(d.video, d.segment, l)) {
        d.transcode = true;
        d.compute_share = compute;
        const double transcoded = jrat_decision_value(env, twins, d);
        if (transcoded > value) {
          value = transcoded;
          chosen = d;
        }
      }
    }
  }
  if (best) *best = chosen;
  return value;
}

std::vector<DeliveryDecision> jrat_decide(const StreamingEnv& env, const TwinBank& twins,
                                          std::size_t increments) {
  if (increments == 0) throw InvalidArgument("jrat: need at least one increment");
  const std::size_t n = env.users();
  const double step = 1.0 / static_cast<double>(increments);
  std::vector<std::size_t> bw(n, 0);
  std::vector<std::size_t> cpu(n, 0);
  std::vector<double> value(n, 0.0);
  std::size_t bw_left = increments;
  std::size_t cpu_left = increments;

  auto share = [&](std::size_t units) { return static_cast<double>(units) * step; };

  while (bw_left > 0 || cpu_left > 0) {
    double best_gain = 0.0;
    std::size_t best_user = n;
    bool best_is_bw = true;
    double best_value = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!env.active(u)) continue;
      if (bw_left > 0) {
        const double v = jrat_best_value(env, twins, u, share(bw[u] + 1), share(cpu[u]));
        if (v - value[u] > best_gain) {
          best_gain = v - value[u];
          best_user = u;
          best_is_bw = true;
          best_value = v;
        }
      }
      if (cpu_left > 0 && bw[u] > 0) {
        const double v = jrat_best_value(env, twins, u, share(bw[u]), share(cpu[u] + 1));
        if (v - value[u] > best_gain) {
          best_gain = v - value[u];
          best_user = u;
          best_is_bw = false;
          best_value = v;
        }
      }
    }
    if (best_user == n) break;
    if (best_is_bw) {
      ++bw[best_user];
      --bw_left;
    } else {
      ++cpu[best_user];
      --cpu_left;
    }
    value[best_user] = best_value;
  }

  std::vector<DeliveryDecision> out;
  out.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    DeliveryDecision d;
    jrat_best_value(env, twins, u, share(bw[u]), share(cpu[u]), &d);
    out.push_back(d);
  }
  return out;
}

}  // namespace dtstream
