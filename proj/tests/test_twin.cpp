#include <vector>

#include "doctest.h"
#include "dtstream/errors.hpp"
#include "dtstream/twin.hpp"
#include "synthetic.hpp"

using namespace dtstream;
using dtstream::testing::synthetic_sessions;
using dtstream::testing::synthetic_truth;
using dtstream::testing::worst_relative_error;

namespace {

UdtRecord plain_record(double engagement) {
  UdtRecord r;
  r.segment_count = 10;
  r.segment_duration_s = 1.0;
  r.engagement_s = engagement;
  r.series = {SlotFactors{35.0, 0.0, 0.0, 5.0, 10.0}};
  return r;
}

}  // namespace

TEST_CASE("history ring") {
  UserDigitalTwin twin(0, 50);
  twin.record_session(plain_record(4.0));
  CHECK(twin.history().size() == 1);
  CHECK(twin.history().front().reference == 2.0);
  for (int i = 1; i <= 50; ++i) twin.record_session(plain_record(0.1 * i));
  CHECK(twin.history().size() == 50);
  CHECK(twin.history().front().engagement_s == doctest::Approx(0.1));
  CHECK_THROWS_AS(twin.record_session(plain_record(10.5)), InvalidArgument);
}

TEST_CASE("fit recovers noise-free generators") {
  FitOptions options;
  options.seed = 11;
  for (std::size_t u = 0; u < 3; ++u) {
    const PqoeParams truth = synthetic_truth(u);
    const std::vector<UdtRecord> sessions = synthetic_sessions(truth, 12, 100 + u);
    const FitResult fit = fit_params(sessions, options);
    CAPTURE(u);
    CHECK(worst_relative_error(fit.params, truth) < 0.10);
    CHECK(fit.residual < 1e-6);
    CHECK_FALSE(fit.degenerate);
  }
}

TEST_CASE("fit tolerates one percent noise") {
  FitOptions options;
  options.seed = 12;
  const PqoeParams truth = synthetic_truth(1);
  const std::vector<UdtRecord> sessions = synthetic_sessions(truth, 20, 7, 0.01);
  const FitResult fit = fit_params(sessions, options);
  CHECK(worst_relative_error(fit.params, truth) < 0.25);
}

TEST_CASE("fit is deterministic for a seed") {
  FitOptions options;
  options.seed = 3;
  const std::vector<UdtRecord> sessions = synthetic_sessions(synthetic_truth(2), 10, 5, 0.02);
  const FitResult a = fit_params(sessions, options);
  const FitResult b = fit_params(sessions, options);
  CHECK(a.params == b.params);
  CHECK(a.residual == b.residual);
}

TEST_CASE("too few sessions") {
  const std::vector<UdtRecord> sessions = synthetic_sessions(synthetic_truth(0), 3, 1);
  CHECK_THROWS_AS(fit_params(sessions, FitOptions{}), InsufficientData);
}

TEST_CASE("all-zero factors pin the weights at their lower bounds") {
  std::vector<UdtRecord> sessions;
  for (int i = 0; i < 5; ++i) {
    UdtRecord r = plain_record(2.0 + i);
    r.series = {SlotFactors{0.0, 0.0, 0.0, 1.0, 4.0}, SlotFactors{0.0, 0.0, 0.0, 4.0, 4.0}};
    r.reference = 1.0 + 0.5 * i;
    sessions.push_back(r);
  }
  const FitResult fit = fit_params(sessions, FitOptions{});
  CHECK(fit.degenerate);
  CHECK(fit.params.alpha == 0.0);
  CHECK(fit.params.beta == 0.0);
  CHECK(fit.params.gamma == 0.0);
  CHECK(fit.residual == doctest::Approx(fit_objective(sessions, fit.params)));
  CHECK(fit.residual > 0.0);
}

TEST_CASE("current params follow the last good fit") {
  const PqoeParams fallback{33.0, 0.2, 0.4, 0.6};
  UserDigitalTwin twin(0, 50);
  CHECK(twin.current_params(fallback) == fallback);

  FitOptions options;
  options.min_sessions = 4;
  for (const UdtRecord& r : synthetic_sessions(synthetic_truth(0), 8, 21)) twin.record_session(r);
  REQUIRE(twin.refit(options, 1));
  const PqoeParams fitted = twin.current_params(fallback);
  CHECK(worst_relative_error(fitted, synthetic_truth(0)) < 0.10);

  // A window too small for min_sessions fails and keeps the previous fit.
  options.window = 2;
  CHECK_FALSE(twin.refit(options, 2));
  CHECK(twin.current_params(fallback) == fitted);
  CHECK(twin.last_fit_episode() == 1);
}

TEST_CASE("bank refits only when adaptive") {
  TwinBankConfig config;
  config.fit.min_sessions = 4;
  config.adaptive = false;
  TwinBank frozen(2, config);
  config.adaptive = true;
  TwinBank live(2, config);
  for (const UdtRecord& r : synthetic_sessions(synthetic_truth(3), 6, 8)) {
    frozen.on_session(1, r, 0);
    live.on_session(1, r, 0);
  }
  CHECK(frozen.fit_calls() == 0);
  CHECK(frozen.params(1) == config.prior);
  CHECK(live.fit_calls() == 3);
  CHECK_FALSE(live.params(1) == config.prior);
  CHECK(live.params(0) == config.prior);
  CHECK(live.fit_report().size() == 3);

  config.cadence = RefitCadence::kPerEpisode;
  TwinBank episodic(1, config);
  for (const UdtRecord& r : synthetic_sessions(synthetic_truth(3), 6, 8)) episodic.on_session(0, r, 0);
  CHECK(episodic.fit_calls() == 0);
  episodic.on_episode_end(0);
  CHECK(episodic.fit_calls() == 1);
}
