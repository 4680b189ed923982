#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dtstream/baselines.hpp"
#include "dtstream/catalog.hpp"
#include "dtstream/ddpg.hpp"
#include "dtstream/env.hpp"
#include "dtstream/playback.hpp"
#include "dtstream/radio.hpp"
#include "dtstream/twin.hpp"

namespace dtstream {

// Everything a run needs. Defaults reproduce the full-scale simulation table
// (12 users, 1500 episodes of 100 slots, 200 MHz, ...).
struct ExperimentConfig {
  // [experiment]
  std::size_t episodes = 1500;
  std::size_t eval_episodes = 20;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<PolicyKind> schemes{PolicyKind::kDCTRA, PolicyKind::kCTRA, PolicyKind::kJRAT,
                                  PolicyKind::kPF, PolicyKind::kRR};
  std::size_t rr_served = 3;
  std::size_t jrat_increments = 12;
  std::size_t jobs = 1;

  // [catalog], [channel], [compute], [env], [departure]
  CatalogSpec catalog;
  ChannelModel channel;
  ComputeModel compute;
  EnvConfig env;
  DepartureModel departure;

  // [agent]
  AgentConfig agent;

  // [twin]
  TwinBankConfig twin;
  // Optional session CSV used to seed every twin before training.
  std::string twin_sessions_csv;

  // [output]
  std::string out_dir = "runs";
  bool write_trace = true;
  bool write_checkpoints = true;

  void validate() const;
};

// Parses the sectioned key = value format. Unknown sections or keys, bad
// values and failed validation raise ConfigError naming the offending key.
ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

// Writes every effective setting in the same format parse_config reads.
void write_config(std::ostream& out, const ExperimentConfig& config);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<PolicyKind> parse_scheme_list(const std::string& text);

}  // namespace dtstream
