#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dtstream/config.hpp"
#include "dtstream/errors.hpp"
#include "dtstream/harness.hpp"
#include "dtstream/pqoe.hpp"

namespace fs = std::filesystem;
using namespace dtstream;

namespace {

ExperimentConfig config_from(const std::string& path) {
  if (path.empty()) {
    std::istringstream empty;
    return parse_config(empty, "<defaults>");
  }
  return load_config(path);
}

int cmd_run(const std::string& config_path, const std::string& out, const std::string& schemes,
            const std::string& seeds, std::size_t jobs) {
  ExperimentConfig config = config_from(config_path);
  if (!schemes.empty()) config.schemes = parse_scheme_list(schemes);
  if (!seeds.empty()) config.seeds = parse_seed_list(seeds);
  if (jobs > 0) config.jobs = jobs;
  config.out_dir = out.empty() ? output_root(config.out_dir) : out;
  config.validate();

  const ExperimentResult result = run_experiment(config);
  std::printf("%-6s %6s %10s %10s %10s\n", "scheme", "seed", "lead", "trail", "eval_pqoe");
  for (const CellResult& c : result.cells) {
    double lead = 0.0;
    double trail = 0.0;
    const std::size_t n = std::min<std::size_t>(30, c.curve.size());
    for (std::size_t i = 0; i < n; ++i) {
      lead += c.curve[i].mean_reward;
      trail += c.curve[c.curve.size() - 1 - i].mean_reward;
    }
    if (n > 0) {
      lead /= static_cast<double>(n);
      trail /= static_cast<double>(n);
    }
    std::printf("%-6s %6llu %10.4f %10.4f %10.4f\n", std::string(to_string(c.scheme)).c_str(),
                static_cast<unsigned long long>(c.seed), lead, trail, c.eval_mean_pqoe);
  }
  std::printf("wrote %s\n", result.out_dir.string().c_str());
  return 0;
}

int cmd_fit_report(const std::string& config_path, const std::string& sessions,
                   std::size_t users, const std::string& out) {
  ExperimentConfig config = config_from(config_path);
  TwinBankConfig twin_config = config.twin;
  twin_config.adaptive = true;
  TwinBank twins(users, twin_config);
  const SeedReport report = seed_twins_from_csv(sessions, twins, config.catalog.segments_per_video,
                                                config.catalog.segment_duration_s);
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw Error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "user,sessions,lambda,alpha,beta,gamma,residual\n";
  for (std::size_t u = 0; u < users; ++u) {
    const UserDigitalTwin& twin = twins.twin(u);
    const PqoeParams p = twin.current_params(config.twin.prior);
    const double residual = twin.last_fit() ? twin.last_fit()->residual : 0.0;
    os << u << ',' << twin.history().size() << ',' << p.lambda << ',' << p.alpha << ',' << p.beta
       << ',' << p.gamma << ',' << residual << '\n';
  }
  std::fprintf(stderr, "%zu sessions read, %zu rows skipped\n", report.sessions, report.skipped_rows);
  return 0;
}

// Rebuilds comparison tables from the user_totals.csv files of a run.
int cmd_compare(const std::string& run_dir) {
  std::ifstream manifest_file(fs::path(run_dir) / "manifest.json");
  if (!manifest_file) throw Error("no manifest.json in " + run_dir);
  const nlohmann::json manifest = nlohmann::json::parse(manifest_file);

  std::vector<PolicyKind> schemes;
  for (const auto& name : manifest.at("schemes")) schemes.push_back(parse_policy(name.get<std::string>()));
  std::map<std::uint64_t, std::map<PolicyKind, std::vector<double>>> totals;
  for (const auto& cell : manifest.at("cells")) {
    const fs::path path = fs::path(run_dir) / cell.at("dir").get<std::string>() / "user_totals.csv";
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<double> values;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      values.push_back(std::stod(line.substr(comma + 1)));
    }
    totals[cell.at("seed").get<std::uint64_t>()][parse_policy(cell.at("scheme").get<std::string>())] =
        std::move(values);
  }

  std::map<PolicyKind, double> mean_norm;
  std::size_t rows = 0;
  std::cout << "seed,user,scheme,total_pqoe,normalized\n";
  for (const auto& [seed, by_scheme] : totals) {
    std::vector<std::vector<double>> table;
    for (PolicyKind k : schemes) table.push_back(by_scheme.at(k));
    write_comparison(std::cout, seed, schemes, table);
    const NormalizedPqoe norm = normalize_pqoe(table);
    for (std::size_t k = 0; k < schemes.size(); ++k) {
      for (double v : norm.values[k]) mean_norm[schemes[k]] += v;
    }
    rows += table.front().size();
  }
  for (PolicyKind k : schemes) {
    std::fprintf(stderr, "%-6s mean normalized PQoE %.4f\n", std::string(to_string(k)).c_str(),
                 rows ? mean_norm[k] / static_cast<double>(rows) : 0.0);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dtstream: twin-assisted adaptive video streaming simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::string schemes;
  std::string seeds;
  std::size_t jobs = 0;
  CLI::App* run = app.add_subcommand("run", "train and evaluate every scheme x seed cell");
  run->add_option("--config", config_path, "config file (defaults when omitted)");
  run->add_option("--out", out, "output directory (overrides DTSTREAM_OUT and the config)");
  run->add_option("--schemes", schemes, "comma-separated subset of DCTRA,CTRA,JRAT,PF,RR");
  run->add_option("--seeds", seeds, "comma-separated seeds");
  run->add_option("--jobs", jobs, "cells run in parallel");

  std::string sessions;
  std::size_t users = 12;
  std::string fit_out;
  CLI::App* fit = app.add_subcommand("fit-report", "fit twins from a session CSV");
  fit->add_option("--config", config_path, "config file for video length and fit settings");
  fit->add_option("--sessions", sessions, "CSV: user,video,slot,V_db,H_levels,R_s,engagement_s")->required();
  fit->add_option("--users", users, "number of users");
  fit->add_option("--out", fit_out, "write the report here instead of stdout");

  std::string run_dir;
  CLI::App* compare = app.add_subcommand("compare", "normalized PQoE table of a finished run");
  compare->add_option("run_dir", run_dir, "directory written by `run`")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(config_path, out, schemes, seeds, jobs);
    if (fit->parsed()) return cmd_fit_report(config_path, sessions, users, fit_out);
    if (compare->parsed()) return cmd_compare(run_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dtstream: %s\n", e.what());
    return 1;
  }
  return 0;
}
