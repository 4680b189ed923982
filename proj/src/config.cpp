#include "dtstream/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dtstream/errors.hpp"

namespace dtstream {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidArgument("expected true or false, got '" + s + "'");
}

// Shortest text that reads back to the same double.
std::string from_double(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += f(items[i]);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field real(std::string section, std::string key, T ExperimentConfig::*group, double T::*member) {
  return {std::move(section), std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { (c.*group).*member = to_double(v); },
          [=](const ExperimentConfig& c) { return from_double((c.*group).*member); }};
}

template <typename T>
Field count(std::string section, std::string key, T ExperimentConfig::*group,
            std::size_t T::*member) {
  return {std::move(section), std::move(key),
          [=](ExperimentConfig& c, const std::string& v) {
            (c.*group).*member = static_cast<std::size_t>(to_unsigned(v));
          },
          [=](const ExperimentConfig& c) { return std::to_string((c.*group).*member); }};
}

template <typename T>
Field flag(std::string section, std::string key, T ExperimentConfig::*group, bool T::*member) {
  return {std::move(section), std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { (c.*group).*member = to_bool(v); },
          [=](const ExperimentConfig& c) { return std::string((c.*group).*member ? "true" : "false"); }};
}

Field top_count(std::string section, std::string key, std::size_t ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [=](ExperimentConfig& c, const std::string& v) {
            c.*member = static_cast<std::size_t>(to_unsigned(v));
          },
          [=](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field top_flag(std::string section, std::string key, bool ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { c.*member = to_bool(v); },
          [=](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field top_text(std::string section, std::string key, std::string ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { c.*member = v; },
          [=](const ExperimentConfig& c) { return c.*member; }};
}

// Nested members of the twin settings.
Field fit_count(std::string key, std::size_t FitOptions::*member) {
  return {"twin", std::move(key),
          [=](ExperimentConfig& c, const std::string& v) {
            c.twin.fit.*member = static_cast<std::size_t>(to_unsigned(v));
          },
          [=](const ExperimentConfig& c) { return std::to_string(c.twin.fit.*member); }};
}

Field fit_real(std::string key, double FitOptions::*member) {
  return {"twin", std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { c.twin.fit.*member = to_double(v); },
          [=](const ExperimentConfig& c) { return from_double(c.twin.fit.*member); }};
}

Field prior_real(std::string key, double PqoeParams::*member) {
  return {"twin", std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { c.twin.prior.*member = to_double(v); },
          [=](const ExperimentConfig& c) { return from_double(c.twin.prior.*member); }};
}

Field ou_real(std::string key, double OuParams::*member) {
  return {"agent", std::move(key),
          [=](ExperimentConfig& c, const std::string& v) { c.agent.noise.*member = to_double(v); },
          [=](const ExperimentConfig& c) { return from_double(c.agent.noise.*member); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      top_count("experiment", "episodes", &C::episodes),
      top_count("experiment", "eval_episodes", &C::eval_episodes),
      {"experiment", "seeds",
       [](C& c, const std::string& v) { c.seeds = parse_seed_list(v); },
       [](const C& c) {
         return join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
       }},
      {"experiment", "schemes",
       [](C& c, const std::string& v) { c.schemes = parse_scheme_list(v); },
       [](const C& c) {
         return join<PolicyKind>(c.schemes, [](const PolicyKind& k) { return std::string(to_string(k)); });
       }},
      top_count("experiment", "rr_served", &C::rr_served),
      top_count("experiment", "jrat_increments", &C::jrat_increments),
      top_count("experiment", "jobs", &C::jobs),

      count("catalog", "videos", &C::catalog, &CatalogSpec::video_count),
      count("catalog", "segments_per_video", &C::catalog, &CatalogSpec::segments_per_video),
      real("catalog", "segment_s", &C::catalog, &CatalogSpec::segment_duration_s),
      {"catalog", "bitrates_bps",
       [](C& c, const std::string& v) {
         c.catalog.version_bitrates_bps.clear();
         for (const std::string& item : split_list(v)) c.catalog.version_bitrates_bps.push_back(to_double(item));
       },
       [](const C& c) { return join<double>(c.catalog.version_bitrates_bps, from_double); }},
      real("catalog", "cache_fraction", &C::catalog, &CatalogSpec::cache_fraction),
      real("catalog", "popularity_exponent", &C::catalog, &CatalogSpec::popularity_exponent),
      real("catalog", "lower_version_cache_probability", &C::catalog,
           &CatalogSpec::lower_version_cache_probability),

      real("channel", "bandwidth_hz", &C::channel, &ChannelModel::bandwidth_hz),
      real("channel", "tx_power_dbm", &C::channel, &ChannelModel::tx_power_dbm),
      real("channel", "noise_power_dbm", &C::channel, &ChannelModel::noise_power_dbm),
      real("channel", "antenna_gain_db", &C::channel, &ChannelModel::antenna_gain_db),
      real("channel", "cell_radius_m", &C::channel, &ChannelModel::cell_radius_m),
      flag("channel", "shadowing", &C::channel, &ChannelModel::shadowing),
      real("channel", "shadowing_sigma_db", &C::channel, &ChannelModel::shadowing_sigma_db),

      real("compute", "edge_capacity_cps", &C::compute, &ComputeModel::edge_capacity_cps),
      real("compute", "transcode_intensity_cpb", &C::compute, &ComputeModel::transcode_intensity_cpb),
      real("compute", "backhaul_bps", &C::compute, &ComputeModel::backhaul_bps),

      count("env", "users", &C::env, &EnvConfig::users),
      real("env", "slot_s", &C::env, &EnvConfig::slot_s),
      count("env", "t_max", &C::env, &EnvConfig::t_max),
      flag("env", "departures", &C::env, &EnvConfig::departures),
      flag("env", "mobility", &C::env, &EnvConfig::mobility),
      real("env", "mobility_sigma_m", &C::env, &EnvConfig::mobility_sigma_m),
      real("env", "min_distance_m", &C::env, &EnvConfig::min_distance_m),
      real("env", "rebuffer_bound_s", &C::env, &EnvConfig::rebuffer_bound_s),
      real("env", "buffer_bound_s", &C::env, &EnvConfig::buffer_bound_s),
      real("env", "quality_bound_db", &C::env, &EnvConfig::quality_bound_db),
      flag("env", "reward_scaling", &C::env, &EnvConfig::reward_scaling),
      real("env", "min_share", &C::env, &EnvConfig::min_share),

      real("departure", "base", &C::departure, &DepartureModel::base),
      real("departure", "per_rebuffer_s", &C::departure, &DepartureModel::per_rebuffer_s),
      real("departure", "per_level", &C::departure, &DepartureModel::per_level),
      real("departure", "quality", &C::departure, &DepartureModel::quality),

      {"agent", "hidden",
       [](C& c, const std::string& v) {
         c.agent.hidden.clear();
         for (const std::string& item : split_list(v)) c.agent.hidden.push_back(to_unsigned(item));
       },
       [](const C& c) {
         return join<std::size_t>(c.agent.hidden, [](const std::size_t& h) { return std::to_string(h); });
       }},
      real("agent", "discount", &C::agent, &AgentConfig::discount),
      real("agent", "tau", &C::agent, &AgentConfig::tau),
      real("agent", "actor_rate", &C::agent, &AgentConfig::actor_rate),
      real("agent", "critic_rate", &C::agent, &AgentConfig::critic_rate),
      {"agent", "optimizer",
       [](C& c, const std::string& v) {
         if (v == "sgd") {
           c.agent.optimizer = OptimizerKind::kSgd;
         } else if (v == "adam") {
           c.agent.optimizer = OptimizerKind::kAdam;
         } else {
           throw InvalidArgument("expected sgd or adam, got '" + v + "'");
         }
       },
       [](const C& c) { return std::string(c.agent.optimizer == OptimizerKind::kSgd ? "sgd" : "adam"); }},
      count("agent", "batch", &C::agent, &AgentConfig::batch),
      count("agent", "replay_capacity", &C::agent, &AgentConfig::replay_capacity),
      count("agent", "warmup_batches", &C::agent, &AgentConfig::warmup_batches),
      ou_real("ou_theta", &OuParams::theta),
      ou_real("ou_dt", &OuParams::dt),
      real("agent", "sigma_start", &C::agent, &AgentConfig::sigma_start),
      real("agent", "sigma_end", &C::agent, &AgentConfig::sigma_end),
      real("agent", "final_layer_bound", &C::agent, &AgentConfig::final_layer_bound),

      count("twin", "capacity", &C::twin, &TwinBankConfig::capacity),
      fit_count("window", &FitOptions::window),
      fit_count("min_sessions", &FitOptions::min_sessions),
      fit_count("restarts", &FitOptions::restarts),
      fit_count("max_iterations", &FitOptions::max_iterations),
      fit_real("lambda_lower", &FitOptions::lambda_lower),
      fit_real("weight_upper", &FitOptions::weight_upper),
      {"twin", "cadence",
       [](C& c, const std::string& v) {
         if (v == "session") {
           c.twin.cadence = RefitCadence::kPerSession;
         } else if (v == "episode") {
           c.twin.cadence = RefitCadence::kPerEpisode;
         } else {
           throw InvalidArgument("expected session or episode, got '" + v + "'");
         }
       },
       [](const C& c) {
         return std::string(c.twin.cadence == RefitCadence::kPerSession ? "session" : "episode");
       }},
      prior_real("prior_lambda", &PqoeParams::lambda),
      prior_real("prior_alpha", &PqoeParams::alpha),
      prior_real("prior_beta", &PqoeParams::beta),
      prior_real("prior_gamma", &PqoeParams::gamma),
      top_text("twin", "sessions_csv", &C::twin_sessions_csv),

      top_text("output", "dir", &C::out_dir),
      top_flag("output", "trace", &C::write_trace),
      top_flag("output", "checkpoints", &C::write_checkpoints),
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw InvalidArgument("experiment: need at least one seed");
  if (schemes.empty()) throw InvalidArgument("experiment: need at least one scheme");
  if (rr_served == 0) throw InvalidArgument("experiment: rr_served must be positive");
  if (jrat_increments == 0) throw InvalidArgument("experiment: jrat_increments must be positive");
  if (jobs == 0) throw InvalidArgument("experiment: jobs must be positive");
  catalog.validate();
  channel.validate();
  compute.validate();
  env.validate();
  agent.validate();
  twin.prior.validate();
  if (twin.capacity == 0) throw InvalidArgument("twin: capacity must be positive");
  if (twin.fit.min_sessions == 0 || twin.fit.window < twin.fit.min_sessions) {
    throw InvalidArgument("twin: window must hold at least min_sessions sessions");
  }
  if (!(departure.base >= 0.0) || !(departure.per_rebuffer_s >= 0.0) ||
      !(departure.per_level >= 0.0) || !(departure.quality >= 0.0)) {
    throw InvalidArgument("departure: coefficients must be >= 0");
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(text)) out.push_back(to_unsigned(item));
  if (out.empty()) throw InvalidArgument("empty seed list");
  return out;
}

std::vector<PolicyKind> parse_scheme_list(const std::string& text) {
  std::vector<PolicyKind> out;
  for (const std::string& item : split_list(text)) {
    const PolicyKind k = parse_policy(item);
    if (std::find(out.begin(), out.end(), k) != out.end()) {
      throw InvalidArgument("scheme " + item + " listed twice");
    }
    out.push_back(k);
  }
  if (out.empty()) throw InvalidArgument("empty scheme list");
  return out;
}

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  std::map<std::string, std::map<std::string, const Field*>> index;
  for (const Field& f : fields()) index[f.section][f.key] = &f;

  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError(origin + ": key '" + section + "' must sit inside a [section]");
    }
    const auto sec = index.find(section);
    if (sec == index.end()) throw ConfigError(origin + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) {
        throw ConfigError(origin + ": unknown key '" + key + "' in [" + section + "]");
      }
      try {
        it->second->set(config, trim(value.data()));
      } catch (const InvalidArgument& e) {
        throw ConfigError(origin + ": " + section + "." + key + ": " + e.what());
      }
    }
  }
  try {
    config.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in, path);
}

void write_config(std::ostream& out, const ExperimentConfig& config) {
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
}

}  // namespace dtstream
