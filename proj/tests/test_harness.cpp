#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dtstream/config.hpp"
#include "dtstream/errors.hpp"
#include "dtstream/harness.hpp"

using namespace dtstream;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "<test>");
}

std::string echo(const ExperimentConfig& c) {
  std::ostringstream out;
  write_config(out, c);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

const char* kSmall = R"(
[experiment]
episodes = 3
eval_episodes = 2
seeds = 4
[catalog]
videos = 30
[env]
users = 2
t_max = 20
[agent]
hidden = 8,8
batch = 8
warmup_batches = 1
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dtstream-test-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("empty config gives the full-scale defaults") {
  const ExperimentConfig c = parse("");
  CHECK(c.env.users == 12);
  CHECK(c.episodes == 1500);
  CHECK(c.env.t_max == 100);
  CHECK(c.env.slot_s == 0.1);
  CHECK(c.channel.bandwidth_hz == 200e6);
  CHECK(c.compute.edge_capacity_cps == 1e9);
  CHECK(c.compute.transcode_intensity_cpb == 10.0);
  CHECK(c.compute.backhaul_bps == 200e6);
  CHECK(c.catalog.video_count == 450);
  CHECK(c.catalog.version_bitrates_bps.size() == 4);
  CHECK(c.agent.discount == 0.95);
  CHECK(c.agent.replay_capacity == 6000);
  CHECK(c.agent.batch == 128);
  CHECK(c.schemes.size() == 5);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse("[env]\nusers = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[env]\nusers = three\n"), ConfigError);
  CHECK_THROWS_AS(parse("[env]\nspeed = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[nowhere]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("users = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[experiment]\nschemes = RR,RR\n"), ConfigError);
  CHECK_THROWS_AS(parse("[agent]\noptimizer = rmsprop\n"), ConfigError);
  try {
    parse("[env]\nusers = 0\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("<test>") != std::string::npos);
  }
}

TEST_CASE("overrides are echoed and round trip") {
  const ExperimentConfig c = parse("[experiment]\nepisodes = 300\nschemes = RR,DCTRA\n[agent]\nactor_rate = 1e-5\n");
  CHECK(c.episodes == 300);
  const std::string text = echo(c);
  CHECK(text.find("episodes = 300") != std::string::npos);
  CHECK(text.find("actor_rate = 1e-05") != std::string::npos);
  CHECK(echo(parse(text)) == text);
}

TEST_CASE("list parsing") {
  CHECK(parse_seed_list("1, 2,3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(parse_scheme_list("rr,Dctra") == std::vector<PolicyKind>{PolicyKind::kRR, PolicyKind::kDCTRA});
  CHECK_THROWS(parse_seed_list("1,x"));
}

TEST_CASE("a round-robin cell summarizes every episode") {
  ExperimentConfig c = parse(kSmall);
  c.episodes = 2;
  const CellResult r = run_cell(c, PolicyKind::kRR, 4);
  std::size_t training = 0;
  for (const EpisodeSummary& e : r.episodes) training += e.eval ? 0 : 1;
  CHECK(training == 2);
  CHECK(r.episodes.size() == 4);
  CHECK(r.eval_user_pqoe.size() == 2);
  CHECK(r.slots == 4 * 20);
  CHECK(r.constraint_checks == r.slots);
}

TEST_CASE("scenarios are shared by the schemes of a seed") {
  const ExperimentConfig c = parse(kSmall);
  const Scenario a = make_scenario(c, 4);
  const Scenario b = make_scenario(c, 4);
  std::ostringstream ca;
  std::ostringstream cb;
  a.catalog->write_csv(ca);
  b.catalog->write_csv(cb);
  CHECK(ca.str() == cb.str());
  CHECK(a.profiles[1].perception == b.profiles[1].perception);
  CHECK(eval_episode_seed(4, 0) == eval_episode_seed(4, 0));
  CHECK(eval_episode_seed(4, 0) != eval_episode_seed(5, 0));
}

TEST_CASE("identical runs write identical files") {
  ExperimentConfig c = parse(kSmall);
  c.schemes = {PolicyKind::kDCTRA, PolicyKind::kRR, PolicyKind::kPF, PolicyKind::kJRAT,
               PolicyKind::kCTRA};
  const fs::path a = scratch("a");
  const fs::path b = scratch("b");
  c.out_dir = a.string();
  c.jobs = 2;
  run_experiment(c);
  c.out_dir = b.string();
  c.jobs = 1;
  run_experiment(c);

  for (const char* cell : {"DCTRA/seed-4", "CTRA/seed-4", "RR/seed-4", "JRAT/seed-4"}) {
    for (const char* file : {"trace.csv", "learning_curve.csv", "episode_summary.csv",
                             "user_totals.csv"}) {
      CAPTURE(cell);
      CAPTURE(file);
      const fs::path rel = fs::path(cell) / file;
      if (!fs::exists(a / rel)) continue;
      CHECK(slurp(a / rel) == slurp(b / rel));
    }
  }
  CHECK(slurp(a / "comparison.csv") == slurp(b / "comparison.csv"));
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(fs::exists(a / "DCTRA/seed-4/actor.net"));
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(fs::exists(a / "config.ini"));
  CHECK(line_count(slurp(a / "RR/seed-4/episode_summary.csv")) == 1 + 3 + 2);

  // Every user's best scheme scores 1.0 in the comparison.
  std::istringstream rows(slurp(a / "comparison.csv"));
  std::string line;
  std::getline(rows, line);
  std::size_t ones = 0;
  std::size_t total = 0;
  while (std::getline(rows, line)) {
    ++total;
    if (line.substr(line.rfind(',') + 1) == "1") ++ones;
  }
  CHECK(total == 5 * 2);
  CHECK(ones >= 2);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("seeding twins from a session file") {
  TwinBankConfig config;
  config.adaptive = false;

  SUBCASE("empty file") {
    TwinBank twins(2, config);
    std::istringstream in("");
    const SeedReport r = seed_twins_from_csv(in, twins, 10, 1.0);
    CHECK(r.sessions == 0);
    CHECK(r.skipped_rows == 0);
    CHECK(twins.twin(0).history().empty());
  }
  SUBCASE("one session") {
    TwinBank twins(2, config);
    std::istringstream in(
        "user,video,slot,V_db,H_levels,R_s,engagement_s\n"
        "1,7,0,35,0,0.2,6\n"
        "1,7,3,38,1,0,6\n");
    const SeedReport r = seed_twins_from_csv(in, twins, 10, 1.0);
    CHECK(r.sessions == 1);
    CHECK(r.skipped_rows == 0);
    REQUIRE(twins.twin(1).history().size() == 1);
    const UdtRecord& rec = twins.twin(1).history().front();
    CHECK(rec.engagement_s == 6.0);
    CHECK(rec.total_rebuffer_s == doctest::Approx(0.2));
    CHECK(rec.series.back().final_slot == 3.0);
    CHECK(twins.twin(0).history().empty());
  }
  SUBCASE("bad rows are skipped and counted") {
    TwinBank twins(2, config);
    std::istringstream in(
        "user,video,slot,V_db,H_levels,R_s,engagement_s\n"
        "0,1,0,35,0,0,12\n"
        "5,1,0,35,0,0,3\n"
        "0,1,zero,35,0,0,3\n"
        "0,1,0,35,0\n"
        "0,2,0,35,0,0,4\n");
    const SeedReport r = seed_twins_from_csv(in, twins, 10, 1.0);
    CHECK(r.skipped_rows == 4);
    CHECK(r.sessions == 1);
  }
  CHECK_THROWS_AS(
      [] {
        TwinBank twins(1, TwinBankConfig{});
        seed_twins_from_csv("/nonexistent/sessions.csv", twins, 10, 1.0);
      }(),
      Error);
}
