#include "dtstream/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dtstream/errors.hpp"
#include "dtstream/pqoe.hpp"

#ifndef DTSTREAM_COMMIT
#define DTSTREAM_COMMIT "unknown"
#endif

namespace dtstream {

namespace {

std::uint64_t derive(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5eedu, stream};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Running totals for one episode.
struct EpisodeAccumulator {
  std::size_t steps = 0;
  double reward = 0.0;
  double pqoe = 0.0;
  double rebuffer = 0.0;
  double psnr = 0.0;
  double variation = 0.0;
  std::size_t delivered = 0;

  void add(const StepOutcome& out) {
    ++steps;
    reward += out.reward;
    pqoe += out.perceived;
    for (const UserSlotRecord& rec : out.users) {
      rebuffer += rec.rebuffer_s;
      if (rec.version > 0) {
        psnr += rec.quality_db;
        variation += rec.variation;
        ++delivered;
      }
    }
  }

  EpisodeSummary finish(std::size_t episode, bool eval) const {
    EpisodeSummary s;
    s.episode = episode;
    s.eval = eval;
    const double n = static_cast<double>(std::max<std::size_t>(steps, 1));
    const double m = static_cast<double>(std::max<std::size_t>(delivered, 1));
    s.mean_reward = reward / n;
    s.mean_pqoe = pqoe / n;
    s.total_rebuffer_s = rebuffer;
    s.mean_psnr_db = psnr / m;
    s.mean_variation = variation / m;
    return s;
  }
};

class CellWriter {
 public:
  CellWriter(const std::filesystem::path& dir, bool trace) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    if (trace) {
      trace_ = open_out(dir / "trace.csv");
      trace_ << "episode,phase,t,user,video,segment,version,case,delay_s,rebuffer_s,buffer_s,"
                "psnr_db,variation,engaged,pqoe,perceived,reward\n";
    }
  }

  void slot(std::size_t episode, bool eval, const StepOutcome& out) {
    if (!trace_.is_open()) return;
    for (const UserSlotRecord& r : out.users) {
      trace_ << episode << ',' << (eval ? "eval" : "train") << ',' << out.slot << ',' << r.user
             << ',' << r.video << ',' << r.segment << ',' << r.version << ','
             << to_string(r.delay.delivery) << ',' << num(r.delay.total_s) << ','
             << num(r.rebuffer_s) << ',' << num(r.buffer_s) << ',' << num(r.quality_db) << ','
             << r.variation << ',' << (r.engaged ? 1 : 0) << ',' << num(r.pqoe) << ','
             << num(r.perceived) << ',' << num(out.reward) << '\n';
    }
  }

 private:
  std::ofstream trace_;
};

void write_cell_files(const std::filesystem::path& dir, const CellResult& cell,
                      const DdpgAgent* agent) {
  {
    std::ofstream out = open_out(dir / "learning_curve.csv");
    out << "episode,mean_reward,critic_loss,actor_grad_norm,noise_sigma\n";
    for (const CurveRow& r : cell.curve) {
      out << r.episode << ',' << num(r.mean_reward) << ',' << num(r.critic_loss) << ','
          << num(r.actor_grad_norm) << ',' << num(r.noise_sigma) << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "episode_summary.csv");
    out << "episode,seed,scheme,phase,mean_reward,mean_pqoe,total_rebuffer,mean_psnr,mean_variation\n";
    for (const EpisodeSummary& s : cell.episodes) {
      out << s.episode << ',' << cell.seed << ',' << to_string(cell.scheme) << ','
          << (s.eval ? "eval" : "train") << ',' << num(s.mean_reward) << ',' << num(s.mean_pqoe)
          << ',' << num(s.total_rebuffer_s) << ',' << num(s.mean_psnr_db) << ','
          << num(s.mean_variation) << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "fit_report.csv");
    out << "user,episode,lambda,alpha,beta,gamma,residual\n";
    for (const FitReportRow& r : cell.fits) {
      out << r.user << ',' << r.episode << ',' << num(r.params.lambda) << ','
          << num(r.params.alpha) << ',' << num(r.params.beta) << ',' << num(r.params.gamma) << ','
          << num(r.residual) << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "user_totals.csv");
    out << "user,total_pqoe\n";
    for (std::size_t u = 0; u < cell.eval_user_pqoe.size(); ++u) {
      out << u << ',' << num(cell.eval_user_pqoe[u]) << '\n';
    }
  }
  if (agent) {
    std::ofstream actor = open_out(dir / "actor.net");
    agent->actor().save(actor);
    std::ofstream critic = open_out(dir / "critic.net");
    agent->critic().save(critic);
  }
}

double window_mean(const std::vector<CurveRow>& curve, bool trailing) {
  const std::size_t n = std::min<std::size_t>(30, curve.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += curve[trailing ? curve.size() - 1 - i : i].mean_reward;
  }
  return sum / static_cast<double>(n);
}

}  // namespace

Scenario make_scenario(const ExperimentConfig& config, std::uint64_t seed) {
  Scenario s;
  s.catalog = std::make_shared<const SegmentCatalog>(build_catalog(config.catalog, derive(seed, 1)));
  s.profiles = make_user_profiles(config.env.users, config.twin.prior, config.departure, derive(seed, 2));
  return s;
}

std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t episode) {
  return episode_seed(derive(seed, 4), episode);
}

CellResult run_cell(const ExperimentConfig& config, PolicyKind scheme, std::uint64_t seed,
                    const std::filesystem::path& dir) {
  const Scenario scenario = make_scenario(config, seed);
  StreamingEnv env(scenario.catalog, config.channel, config.compute, config.env, scenario.profiles);

  TwinBankConfig twin_config = config.twin;
  twin_config.adaptive = scheme == PolicyKind::kDCTRA;
  twin_config.fit.seed = derive(seed, 5);
  TwinBank twins(config.env.users, twin_config);
  if (!config.twin_sessions_csv.empty()) {
    seed_twins_from_csv(config.twin_sessions_csv, twins, config.catalog.segments_per_video,
                        config.catalog.segment_duration_s);
  }

  CellResult result;
  result.scheme = scheme;
  result.seed = seed;
  result.eval_user_pqoe.assign(config.env.users, 0.0);
  CellWriter writer(dir, config.write_trace);

  std::unique_ptr<DdpgAgent> agent;
  ProportionalFair pf(config.env.users, config.rr_served);
  std::mt19937_64 rr_rng(derive(seed, 3));

  auto decide = [&](const std::vector<double>& state, bool explore) {
    switch (scheme) {
      case PolicyKind::kRR:
        return rr_decide(env, rr_rng, config.rr_served);
      case PolicyKind::kPF:
        return pf.decide(env);
      case PolicyKind::kJRAT:
        return jrat_decide(env, twins, config.jrat_increments);
      case PolicyKind::kCTRA:
      case PolicyKind::kDCTRA:
        break;
    }
    return env.decode_action(agent->act(state, explore));
  };

  EpisodeAccumulator acc;
  auto record = [&](std::size_t episode, bool eval, const StepOutcome& out) {
    writer.slot(episode, eval, out);
    acc.add(out);
    ++result.slots;
    if (eval) {
      for (const UserSlotRecord& r : out.users) result.eval_user_pqoe[r.user] += r.perceived;
    }
    if (out.done) {
      result.episodes.push_back(acc.finish(episode, eval));
      acc = EpisodeAccumulator{};
    }
  };

  if (is_learned(scheme)) {
    agent = std::make_unique<DdpgAgent>(env.state_dim(), env.action_dim(), config.agent,
                                        derive(seed, 6));
    TrainOptions options;
    options.episodes = config.episodes;
    options.seed = seed;
    options.on_step = [&](std::size_t episode, const StepOutcome& out) { record(episode, false, out); };
    result.curve = train(env, twins, *agent, options);
  } else {
    for (std::size_t ep = 0; ep < config.episodes; ++ep) {
      std::vector<double> state = env.reset(episode_seed(seed, ep));
      double reward = 0.0;
      std::size_t steps = 0;
      while (!env.done()) {
        StepOutcome out = env.step(decide(state, false), twins);
        if (scheme == PolicyKind::kPF) pf.observe(out);
        reward += out.reward;
        ++steps;
        record(ep, false, out);
        state = std::move(out.next_state);
      }
      CurveRow row;
      row.episode = ep;
      row.mean_reward = reward / static_cast<double>(std::max<std::size_t>(steps, 1));
      result.curve.push_back(row);
    }
  }

  double eval_reward = 0.0;
  double eval_pqoe = 0.0;
  std::size_t eval_steps = 0;
  for (std::size_t ep = 0; ep < config.eval_episodes; ++ep) {
    std::vector<double> state = env.reset(eval_episode_seed(seed, ep));
    while (!env.done()) {
      StepOutcome out = env.step(decide(state, false), twins);
      if (scheme == PolicyKind::kPF) pf.observe(out);
      eval_reward += out.reward;
      eval_pqoe += out.perceived;
      ++eval_steps;
      record(ep, true, out);
      state = std::move(out.next_state);
    }
  }
  if (eval_steps > 0) {
    result.eval_mean_reward = eval_reward / static_cast<double>(eval_steps);
    result.eval_mean_pqoe = eval_pqoe / static_cast<double>(eval_steps);
  }
  result.fits = twins.fit_report();
  result.constraint_checks = env.constraint_checks();

  if (!dir.empty()) {
    write_cell_files(dir, result, config.write_checkpoints ? agent.get() : nullptr);
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.out_dir = config.out_dir;
  std::filesystem::create_directories(result.out_dir);

  {
    std::ofstream out = open_out(result.out_dir / "config.ini");
    write_config(out, config);
  }

  struct Job {
    PolicyKind scheme;
    std::uint64_t seed;
    std::filesystem::path dir;
  };
  std::vector<Job> jobs;
  for (std::uint64_t seed : config.seeds) {
    for (PolicyKind scheme : config.schemes) {
      jobs.push_back({scheme, seed,
                      result.out_dir / std::string(to_string(scheme)) / ("seed-" + std::to_string(seed))});
    }
  }

  result.cells.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        result.cells[i] = run_cell(config, jobs[i].scheme, jobs[i].seed, jobs[i].dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(config.jobs, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  {
    std::ofstream out = open_out(result.out_dir / "summary.csv");
    out << "scheme,seed,episodes,eval_episodes,leading_reward,trailing_reward,eval_mean_reward,"
           "eval_mean_pqoe\n";
    for (const CellResult& c : result.cells) {
      out << to_string(c.scheme) << ',' << c.seed << ',' << config.episodes << ','
          << config.eval_episodes << ',' << num(window_mean(c.curve, false)) << ','
          << num(window_mean(c.curve, true)) << ',' << num(c.eval_mean_reward) << ','
          << num(c.eval_mean_pqoe) << '\n';
    }
  }
  {
    std::ofstream out = open_out(result.out_dir / "comparison.csv");
    out << "seed,user,scheme,total_pqoe,normalized\n";
    const std::size_t per_seed = config.schemes.size();
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      std::vector<std::vector<double>> totals;
      for (std::size_t k = 0; k < per_seed; ++k) {
        totals.push_back(result.cells[s * per_seed + k].eval_user_pqoe);
      }
      write_comparison(out, config.seeds[s], config.schemes, totals);
    }
  }
  {
    nlohmann::ordered_json manifest;
    manifest["program"] = "dtstream";
    manifest["commit"] = build_commit();
    manifest["config"] = "config.ini";
    manifest["seeds"] = config.seeds;
    std::vector<std::string> names;
    for (PolicyKind k : config.schemes) names.emplace_back(to_string(k));
    manifest["schemes"] = names;
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      cells.push_back({{"scheme", std::string(to_string(jobs[i].scheme))},
                       {"seed", jobs[i].seed},
                       {"dir", std::filesystem::relative(jobs[i].dir, result.out_dir).generic_string()}});
    }
    manifest["cells"] = cells;
    std::ofstream out = open_out(result.out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
  return result;
}

void write_comparison(std::ostream& out, std::uint64_t seed, const std::vector<PolicyKind>& schemes,
                      const std::vector<std::vector<double>>& totals) {
  if (totals.size() != schemes.size()) throw InvalidArgument("comparison: one row per scheme");
  if (totals.empty()) return;
  const NormalizedPqoe norm = normalize_pqoe(totals);
  for (std::size_t u = 0; u < totals.front().size(); ++u) {
    for (std::size_t k = 0; k < schemes.size(); ++k) {
      out << seed << ',' << u << ',' << to_string(schemes[k]) << ',' << num(totals[k][u]) << ','
          << num(norm.values[k][u]) << '\n';
    }
  }
}

namespace {

bool parse_field(const std::string& text, double& v) {
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  return ec == std::errc() && ptr == last && first != last;
}

}  // namespace

SeedReport seed_twins_from_csv(std::istream& in, TwinBank& twins, std::size_t segment_count,
                               double segment_s) {
  SeedReport report;
  const double length = static_cast<double>(segment_count) * segment_s;

  struct Group {
    std::size_t user;
    std::size_t video;
    std::map<std::size_t, SlotFactors> slots;
    double engagement = 0.0;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;

  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      if (line.rfind("user", 0) == 0) continue;
    }
    std::vector<double> v;
    std::string field;
    std::istringstream row(line);
    bool ok = true;
    while (std::getline(row, field, ',')) {
      double x = 0.0;
      if (!parse_field(field, x)) {
        ok = false;
        break;
      }
      v.push_back(x);
    }
    if (!ok || v.size() != 7) {
      ++report.skipped_rows;
      continue;
    }
    const double user = v[0];
    const double video = v[1];
    const double slot = v[2];
    const bool integral = user >= 0 && video >= 0 && slot >= 0 && user == std::floor(user) &&
                          video == std::floor(video) && slot == std::floor(slot);
    if (!integral || user >= static_cast<double>(twins.size()) || !(v[3] >= 0.0) ||
        !(v[4] >= 0.0) || !(v[5] >= 0.0) || !(v[6] >= 0.0) || v[6] > length) {
      ++report.skipped_rows;
      continue;
    }
    const auto key = std::make_pair(static_cast<std::size_t>(user), static_cast<std::size_t>(video));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({key.first, key.second, {}, 0.0});
    }
    Group& g = groups[it->second];
    SlotFactors f;
    f.quality_db = v[3];
    f.variation = v[4];
    f.rebuffer_s = v[5];
    f.slot = slot;
    g.slots[static_cast<std::size_t>(slot)] = f;
    g.engagement = std::max(g.engagement, v[6]);
  }

  for (Group& g : groups) {
    UdtRecord rec;
    rec.video = g.video;
    rec.segment_count = segment_count;
    rec.segment_duration_s = segment_s;
    rec.engagement_s = g.engagement;
    rec.completed = g.engagement >= length;
    const std::size_t last = g.slots.rbegin()->first;
    rec.series.resize(last + 1);
    for (std::size_t t = 0; t <= last; ++t) rec.series[t].slot = static_cast<double>(t);
    for (const auto& [t, f] : g.slots) {
      rec.series[t] = f;
      rec.total_rebuffer_s += f.rebuffer_s;
    }
    for (SlotFactors& f : rec.series) f.final_slot = static_cast<double>(last);
    twins.on_session(g.user, std::move(rec), 0);
    ++report.sessions;
  }
  return report;
}

SeedReport seed_twins_from_csv(const std::string& path, TwinBank& twins, std::size_t segment_count,
                               double segment_s) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read session file " + path);
  return seed_twins_from_csv(in, twins, segment_count, segment_s);
}

std::string output_root(const std::string& fallback) {
  const char* env = std::getenv("DTSTREAM_OUT");
  return env && *env ? std::string(env) : fallback;
}

std::string build_commit() { return DTSTREAM_COMMIT; }

}  // namespace dtstream
