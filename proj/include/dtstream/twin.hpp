#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "dtstream/pqoe.hpp"

namespace dtstream {

// One finished (completed or abandoned) viewing session.
struct UdtRecord {
  std::size_t video = 0;
  // Slot-indexed factors, slot 0 at session start, final_slot = p_u.
  std::vector<SlotFactors> series;
  double engagement_s = 0.0;
  double total_rebuffer_s = 0.0;
  std::size_t segment_count = 0;
  double segment_duration_s = 0.0;
  // Filled in by record_session from the engagement-based reference.
  double reference = 0.0;
  bool completed = false;
};

struct FitOptions {
  std::size_t restarts = 8;
  std::size_t max_iterations = 200;
  // Most recent sessions used by a fit.
  std::size_t window = 20;
  std::size_t min_sessions = 4;
  std::uint64_t seed = 0;
  double lambda_lower = 1.0;
  double weight_upper = 10.0;
};

struct FitResult {
  PqoeParams params;
  // Mean squared difference between accumulated scores and references.
  double residual = 0.0;
  // Some weight had no signal in the data and was pinned at its lower bound.
  bool degenerate = false;
  std::size_t sessions = 0;
};

// Mean over sessions of (accumulate_session(params, series) - reference)^2.
double fit_objective(std::span<const UdtRecord> sessions, const PqoeParams& params);

// Box-constrained Levenberg-Marquardt with multi-start over
// lambda in [lambda_lower, 2 p_max] and alpha, beta, gamma in [0, weight_upper].
// Deterministic for a fixed seed. Throws InsufficientData with fewer than
// `min_sessions` sessions and FitFailure on a non-finite objective.
FitResult fit_params(std::span<const UdtRecord> sessions, const FitOptions& options);

class UserDigitalTwin {
 public:
  explicit UserDigitalTwin(std::size_t user = 0, std::size_t capacity = 50);

  std::size_t user() const { return user_; }

  // Validates the record, computes its reference score, appends it and
  // evicts the oldest record beyond capacity. Throws InvalidArgument for a
  // malformed record.
  void record_session(UdtRecord record);

  const std::deque<UdtRecord>& history() const { return history_; }

  // Fits over the most recent `options.window` sessions without storing.
  FitResult fit(const FitOptions& options) const;

  // Fits and keeps the result. On InsufficientData or FitFailure the previous
  // parameters stay in place and false is returned.
  bool refit(const FitOptions& options, std::size_t episode);

  // Last successful fit, or the fallback prior.
  PqoeParams current_params(const PqoeParams& fallback) const;

  const std::optional<FitResult>& last_fit() const { return last_fit_; }
  std::size_t last_fit_episode() const { return last_fit_episode_; }

 private:
  std::size_t user_;
  std::size_t capacity_;
  std::deque<UdtRecord> history_;
  std::optional<FitResult> last_fit_;
  std::size_t last_fit_episode_ = 0;
};

enum class RefitCadence { kPerSession, kPerEpisode };

struct TwinBankConfig {
  std::size_t capacity = 50;
  FitOptions fit;
  PqoeParams prior;
  RefitCadence cadence = RefitCadence::kPerSession;
  // When false the twins only collect data; parameters stay at the prior.
  bool adaptive = true;
};

struct FitReportRow {
  std::size_t user = 0;
  std::size_t episode = 0;
  PqoeParams params;
  double residual = 0.0;
};

// The per-user twins kept at the edge across episodes.
class TwinBank {
 public:
  TwinBank(std::size_t users, TwinBankConfig config);

  std::size_t size() const { return twins_.size(); }
  const TwinBankConfig& config() const { return config_; }

  PqoeParams params(std::size_t user) const;

  void on_session(std::size_t user, UdtRecord record, std::size_t episode);
  void on_episode_end(std::size_t episode);

  UserDigitalTwin& twin(std::size_t user) { return twins_.at(user); }
  const UserDigitalTwin& twin(std::size_t user) const { return twins_.at(user); }

  std::size_t fit_calls() const { return fit_calls_; }
  const std::vector<FitReportRow>& fit_report() const { return report_; }

 private:
  void refit(std::size_t user, std::size_t episode);

  TwinBankConfig config_;
  std::vector<UserDigitalTwin> twins_;
  std::size_t fit_calls_ = 0;
  std::vector<FitReportRow> report_;
};

}  // namespace dtstream
