#include "dtstream/twin.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "dtstream/errors.hpp"

namespace dtstream {
namespace {

constexpr std::size_t kLambda = 0;
constexpr std::size_t kAlpha = 1;
constexpr std::size_t kBeta = 2;
constexpr std::size_t kGamma = 3;
constexpr std::size_t kParams = 4;

using Theta = std::array<double, kParams>;

// Nonzero slots of a session, reduced to what the score depends on.
struct Term {
  double gap;  // p_u - t
  double quality;
  double variation;
  double rebuffer;
};

struct Session {
  std::vector<Term> terms;
  double reference;
};

PqoeParams to_params(const Theta& t) { return {t[kLambda], t[kAlpha], t[kBeta], t[kGamma]}; }

class LeastSquaresProblem {
 public:
  explicit LeastSquaresProblem(std::span<const UdtRecord> records) {
    sessions_.reserve(records.size());
    for (const UdtRecord& r : records) {
      Session s;
      s.reference = r.reference;
      for (const SlotFactors& f : r.series) {
        max_final_slot_ = std::max(max_final_slot_, f.final_slot);
        if (f.quality_db == 0.0 && f.variation == 0.0 && f.rebuffer_s == 0.0) continue;
        s.terms.push_back({f.final_slot - f.slot, f.quality_db, f.variation, f.rebuffer_s});
        has_signal_[kAlpha] = has_signal_[kAlpha] || f.quality_db != 0.0;
        has_signal_[kBeta] = has_signal_[kBeta] || f.variation != 0.0;
        has_signal_[kGamma] = has_signal_[kGamma] || f.rebuffer_s != 0.0;
      }
      sessions_.push_back(std::move(s));
    }
    has_signal_[kLambda] = has_signal_[kAlpha] || has_signal_[kBeta] || has_signal_[kGamma];
  }

  std::size_t rows() const { return sessions_.size(); }
  double max_final_slot() const { return max_final_slot_; }
  bool has_signal(std::size_t j) const { return has_signal_[j]; }

  // Residuals and Jacobian rows; returns the mean squared residual.
  double evaluate(const Theta& t, Eigen::VectorXd* residual, Eigen::MatrixXd* jacobian) const {
    const double inv_lambda = 1.0 / t[kLambda];
    double cost = 0.0;
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      double score = 0.0;
      std::array<double, kParams> row{};
      for (const Term& term : sessions_[i].terms) {
        const double m = std::exp(-term.gap * inv_lambda);
        const double impairment =
            t[kAlpha] * term.quality - t[kBeta] * term.variation - t[kGamma] * term.rebuffer;
        score += m * impairment;
        if (jacobian) {
          row[kLambda] += m * term.gap * inv_lambda * inv_lambda * impairment;
          row[kAlpha] += m * term.quality;
          row[kBeta] -= m * term.variation;
          row[kGamma] -= m * term.rebuffer;
        }
      }
      const double r = score - sessions_[i].reference;
      cost += r * r;
      if (residual) (*residual)(static_cast<Eigen::Index>(i)) = r;
      if (jacobian) {
        for (std::size_t j = 0; j < kParams; ++j) {
          (*jacobian)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
      }
    }
    return cost / static_cast<double>(sessions_.size());
  }

 private:
  std::vector<Session> sessions_;
  double max_final_slot_ = 0.0;
  std::array<bool, kParams> has_signal_{};
};

struct Box {
  Theta lower;
  Theta upper;
  std::array<bool, kParams> fixed{};

  Theta clamp(Theta t) const {
    for (std::size_t j = 0; j < kParams; ++j) {
      t[j] = fixed[j] ? lower[j] : std::clamp(t[j], lower[j], upper[j]);
    }
    return t;
  }
};

// Projected Levenberg-Marquardt: parameters pinned at a bound with the
// gradient pushing outward are dropped from the step.
std::pair<Theta, double> levenberg_marquardt(const LeastSquaresProblem& problem, const Box& box,
                                             Theta theta, std::size_t max_iterations) {
  const auto n = static_cast<Eigen::Index>(problem.rows());
  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, static_cast<Eigen::Index>(kParams));
  Eigen::VectorXd r_trial(n);
  theta = box.clamp(theta);
  double cost = problem.evaluate(theta, &r, &jac);
  if (!std::isfinite(cost)) throw FitFailure("twin fit: non-finite objective at start point");
  double damping = 1e-3;

  for (std::size_t iter = 0; iter < max_iterations && cost > 0.0; ++iter) {
    const Eigen::Matrix4d normal = jac.transpose() * jac;
    const Eigen::Vector4d grad = jac.transpose() * r;

    std::array<std::size_t, kParams> free{};
    std::size_t free_count = 0;
    for (std::size_t j = 0; j < kParams; ++j) {
      if (box.fixed[j]) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      if (theta[j] <= box.lower[j] && grad(jj) > 0.0) continue;
      if (theta[j] >= box.upper[j] && grad(jj) < 0.0) continue;
      free[free_count++] = j;
    }
    if (free_count == 0) break;

    bool accepted = false;
    while (!accepted && damping < 1e12) {
      const auto m = static_cast<Eigen::Index>(free_count);
      Eigen::MatrixXd system(m, m);
      Eigen::VectorXd rhs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        const auto ja = static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]);
        rhs(a) = -grad(ja);
        for (Eigen::Index b = 0; b < m; ++b) {
          system(a, b) = normal(ja, static_cast<Eigen::Index>(free[static_cast<std::size_t>(b)]));
        }
        const double diag = normal(ja, ja) > 0.0 ? normal(ja, ja) : 1.0;
        system(a, a) += damping * diag;
      }
      const Eigen::VectorXd step = system.ldlt().solve(rhs);
      Theta trial = theta;
      for (Eigen::Index a = 0; a < m; ++a) trial[free[static_cast<std::size_t>(a)]] += step(a);
      trial = box.clamp(trial);
      if (trial == theta) break;

      const double trial_cost = problem.evaluate(trial, &r_trial, nullptr);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double improvement = (cost - trial_cost) / cost;
        theta = trial;
        cost = problem.evaluate(theta, &r, &jac);
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        if (improvement < 1e-15) return {theta, cost};
      } else {
        damping *= 4.0;
      }
    }
    if (!accepted) break;
  }
  return {theta, cost};
}

}  // namespace

double fit_objective(std::span<const UdtRecord> sessions, const PqoeParams& params) {
  if (sessions.empty()) return 0.0;
  double total = 0.0;
  for (const UdtRecord& r : sessions) {
    const double d = accumulate_session(params, r.series) - r.reference;
    total += d * d;
  }
  return total / static_cast<double>(sessions.size());
}

FitResult fit_params(std::span<const UdtRecord> sessions, const FitOptions& options) {
  if (sessions.size() < std::max<std::size_t>(options.min_sessions, 1)) {
    throw InsufficientData("twin fit: need at least " + std::to_string(options.min_sessions) +
                           " sessions, have " + std::to_string(sessions.size()));
  }
  const LeastSquaresProblem problem(sessions);

  Box box;
  box.lower = {options.lambda_lower, 0.0, 0.0, 0.0};
  const double lambda_upper = std::max(2.0 * problem.max_final_slot(), options.lambda_lower * 2.0);
  box.upper = {lambda_upper, options.weight_upper, options.weight_upper, options.weight_upper};
  bool degenerate = false;
  for (std::size_t j = 0; j < kParams; ++j) {
    if (!problem.has_signal(j)) {
      box.fixed[j] = true;
      degenerate = true;
    }
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](double lo, double hi) {
    return lo * std::pow(hi / lo, unit(rng));
  };
  const PqoeParams prior;

  Theta best{};
  double best_cost = INFINITY;
  const std::size_t starts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t s = 0; s < starts; ++s) {
    Theta start;
    if (s == 0) {
      start = {prior.lambda, prior.alpha, prior.beta, prior.gamma};
    } else {
      start[kLambda] = log_uniform(box.lower[kLambda], box.upper[kLambda]);
      for (std::size_t j = kAlpha; j < kParams; ++j) {
        start[j] = log_uniform(1e-3, options.weight_upper);
      }
    }
    const auto [theta, cost] = levenberg_marquardt(problem, box, start, options.max_iterations);
    if (!std::isfinite(cost)) throw FitFailure("twin fit: non-finite objective");
    if (cost < best_cost) {
      best_cost = cost;
      best = theta;
    }
  }

  FitResult out;
  out.params = to_params(best);
  out.residual = best_cost;
  out.degenerate = degenerate;
  out.sessions = sessions.size();
  return out;
}

UserDigitalTwin::UserDigitalTwin(std::size_t user, std::size_t capacity)
    : user_(user), capacity_(capacity) {
  if (capacity_ == 0) throw InvalidArgument("twin: capacity must be positive");
}

void UserDigitalTwin::record_session(UdtRecord record) {
  if (record.segment_count == 0 || !(record.segment_duration_s > 0.0)) {
    throw InvalidArgument("twin: record needs a positive video length");
  }
  const double length = static_cast<double>(record.segment_count) * record.segment_duration_s;
  if (!(record.engagement_s >= 0.0) || record.engagement_s > length * (1.0 + 1e-12)) {
    throw InvalidArgument("twin: engagement time outside [0, K_f e]");
  }
  if (!(record.total_rebuffer_s >= 0.0)) throw InvalidArgument("twin: negative total rebuffer");
  for (const SlotFactors& f : record.series) {
    if (!(f.quality_db >= 0.0) || !(f.variation >= 0.0) || !(f.rebuffer_s >= 0.0) ||
        !(f.slot >= 0.0) || !(f.slot <= f.final_slot)) {
      throw InvalidArgument("twin: malformed slot factors");
    }
  }
  record.reference = reference_score(record.engagement_s, record.segment_count,
                                     record.segment_duration_s, record.total_rebuffer_s);
  history_.push_back(std::move(record));
  while (history_.size() > capacity_) history_.pop_front();
}

FitResult UserDigitalTwin::fit(const FitOptions& options) const {
  const std::size_t window = std::min(std::max<std::size_t>(options.window, 1), history_.size());
  std::vector<UdtRecord> recent(history_.end() - static_cast<std::ptrdiff_t>(window),
                                history_.end());
  return fit_params(recent, options);
}

bool UserDigitalTwin::refit(const FitOptions& options, std::size_t episode) {
  try {
    last_fit_ = fit(options);
    last_fit_episode_ = episode;
    return true;
  } catch (const InsufficientData&) {
    return false;
  } catch (const FitFailure&) {
    return false;
  }
}

PqoeParams UserDigitalTwin::current_params(const PqoeParams& fallback) const {
  return last_fit_ ? last_fit_->params : fallback;
}

TwinBank::TwinBank(std::size_t users, TwinBankConfig config) : config_(std::move(config)) {
  config_.prior.validate();
  twins_.reserve(users);
  for (std::size_t u = 0; u < users; ++u) twins_.emplace_back(u, config_.capacity);
}

PqoeParams TwinBank::params(std::size_t user) const {
  if (!config_.adaptive) return config_.prior;
  return twins_.at(user).current_params(config_.prior);
}

void TwinBank::on_session(std::size_t user, UdtRecord record, std::size_t episode) {
  twins_.at(user).record_session(std::move(record));
  if (config_.adaptive && config_.cadence == RefitCadence::kPerSession) refit(user, episode);
}

void TwinBank::on_episode_end(std::size_t episode) {
  if (!config_.adaptive || config_.cadence != RefitCadence::kPerEpisode) return;
  for (std::size_t u = 0; u < twins_.size(); ++u) refit(u, episode);
}

void TwinBank::refit(std::size_t user, std::size_t episode) {
  UserDigitalTwin& twin = twins_[user];
  if (twin.history().size() < config_.fit.min_sessions) return;
  FitOptions options = config_.fit;
  // Distinct deterministic stream per user.
  options.seed = config_.fit.seed ^ (0x9E3779B97F4A7C15ULL * (user + 1));
  ++fit_calls_;
  if (twin.refit(options, episode)) {
    const FitResult& fit = *twin.last_fit();
    report_.push_back({user, episode, fit.params, fit.residual});
  }
}

}  // namespace dtstream
