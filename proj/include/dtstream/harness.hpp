#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dtstream/baselines.hpp"
#include "dtstream/config.hpp"
#include "dtstream/ddpg.hpp"
#include "dtstream/env.hpp"
#include "dtstream/twin.hpp"

namespace dtstream {

// Per-episode aggregate, one row of episode_summary.csv. mean_pqoe is the
// per-slot sum of the users' true (hidden-profile) scores, the quantity the
// schemes are compared on.
struct EpisodeSummary {
  std::size_t episode = 0;
  bool eval = false;
  double mean_reward = 0.0;
  double mean_pqoe = 0.0;
  double total_rebuffer_s = 0.0;
  double mean_psnr_db = 0.0;
  double mean_variation = 0.0;
};

struct CellResult {
  PolicyKind scheme = PolicyKind::kRR;
  std::uint64_t seed = 0;
  std::vector<CurveRow> curve;
  std::vector<EpisodeSummary> episodes;
  // Per user, summed true score over the evaluation episodes.
  std::vector<double> eval_user_pqoe;
  double eval_mean_pqoe = 0.0;
  double eval_mean_reward = 0.0;
  std::vector<FitReportRow> fits;
  std::size_t slots = 0;
  std::size_t constraint_checks = 0;
};

// Everything one (scheme, seed) cell needs that is derived from the seed
// alone, so every scheme of a seed sees the same catalog and users.
struct Scenario {
  std::shared_ptr<const SegmentCatalog> catalog;
  std::vector<UserProfile> profiles;
};

Scenario make_scenario(const ExperimentConfig& config, std::uint64_t seed);

// Seed of evaluation episode `episode`, shared by every scheme of a seed.
std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t episode);

// Runs one cell. With `dir` non-empty the cell's CSVs (and checkpoints for
// learned schemes) are written there.
CellResult run_cell(const ExperimentConfig& config, PolicyKind scheme, std::uint64_t seed,
                    const std::filesystem::path& dir = {});

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::filesystem::path out_dir;
};

// Runs every scheme x seed cell (in parallel up to config.jobs) and writes
// config.ini, manifest.json, summary.csv and comparison.csv under
// config.out_dir, one subdirectory per cell.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SeedReport {
  std::size_t sessions = 0;
  std::size_t skipped_rows = 0;
};

// Reads the session CSV (user,video,slot,V_db,H_levels,R_s,engagement_s),
// groups rows by (user, video) in order of first appearance and hands each
// group to the twin bank as one session. Rows that fail to parse, name an
// unknown user or claim more engagement than the video holds are skipped and
// counted. Throws Error when the file cannot be read.
SeedReport seed_twins_from_csv(const std::string& path, TwinBank& twins,
                               std::size_t segment_count, double segment_s);
SeedReport seed_twins_from_csv(std::istream& in, TwinBank& twins, std::size_t segment_count,
                               double segment_s);

// comparison.csv rows from per-scheme per-user totals of one seed.
void write_comparison(std::ostream& out, std::uint64_t seed, const std::vector<PolicyKind>& schemes,
                      const std::vector<std::vector<double>>& totals);

// Output root: the DTSTREAM_OUT environment variable when set, else `fallback`.
std::string output_root(const std::string& fallback);

// Commit recorded at configure time, or "unknown".
std::string build_commit();

}  // namespace dtstream
