#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "knockoff/defense.hpp"
#include "knockoff/errors.hpp"
#include "knockoff/experiment.hpp"
#include "knockoff/rewards.hpp"

namespace knockoff {

enum class SweepKind { defense, capacity, overlap };

inline SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "defense") return SweepKind::defense;
  if (s == "capacity") return SweepKind::capacity;
  if (s == "overlap") return SweepKind::overlap;
  throw ConfigError("unknown sweep kind '" + s + "'");
}

inline std::string format_sweep_kind(SweepKind k) {
  switch (k) {
    case SweepKind::defense: return "defense";
    case SweepKind::capacity: return "capacity";
    case SweepKind::overlap: return "overlap";
  }
  throw ConfigError("bad sweep kind");
}

struct SweepConfig {
  SweepKind kind = SweepKind::defense;
  std::vector<DefensePolicy> defenses;
  std::vector<std::vector<std::size_t>> capacities;  // hidden widths per member
  std::vector<double> tau_data = {1.0};
  std::vector<double> tau_labels = {1.0};

  SweepConfig() {
    defenses = {DefensePolicy{}, parse_defense("topk:2"), parse_defense("argmax")};
    capacities = {{32}, {64}, {128}};
  }
};

// One parsed config file: the experiment itself plus sweep grids.
struct ConfigFile {
  ExperimentConfig experiment;
  SweepConfig sweep;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::uint64_t parse_config_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline std::size_t parse_config_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_config_u64(key, v));
}

inline double parse_config_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing garbage");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_config_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v, char sep) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

// architectures are written as x-separated widths: "64" or "64x32"
inline std::vector<std::size_t> parse_hidden(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split_list(v, 'x')) {
    std::size_t w = parse_config_size(key, part);
    if (w == 0) throw ConfigError(key + ": zero layer width");
    out.push_back(w);
  }
  if (out.empty()) throw ConfigError(key + ": expected at least one layer width");
  return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split_list(v, ',')) out.push_back(parse_config_size(key, part));
  return out;
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& part : split_list(v, ',')) out.push_back(parse_config_double(key, part));
  return out;
}

}  // namespace detail

// Applies one `key = value` assignment. Shared by the config-file parser and
// the CLI's override flags, so both speak exactly the same grammar. Unknown
// keys are a hard error: a typo must never silently fall back to a default.
inline void apply_config_key(ConfigFile& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  auto& e = cfg.experiment;
  auto& s = cfg.sweep;

  try {
    if (key == "seed") e.seed = parse_config_u64(key, value);
    else if (key == "d_in") e.d_in = parse_config_size(key, value);
    else if (key == "k") e.k = parse_config_size(key, value);
    else if (key == "class_radius") e.class_radius = parse_config_double(key, value);
    else if (key == "sigma") e.sigma = parse_config_double(key, value);
    else if (key == "modes_per_class") e.modes_per_class = parse_config_size(key, value);
    else if (key == "train_per_class") e.train_per_class = parse_config_size(key, value);
    else if (key == "test_per_class") e.test_per_class = parse_config_size(key, value);

    else if (key == "victim.hidden") e.victim_hidden = parse_hidden(key, value);
    else if (key == "victim.epochs") e.victim_train.epochs = parse_config_size(key, value);
    else if (key == "victim.lr") e.victim_train.base_lr = parse_config_double(key, value);
    else if (key == "victim.lr_decay_factor") e.victim_train.lr_decay_factor = parse_config_double(key, value);
    else if (key == "victim.lr_decay_every") e.victim_train.lr_decay_every = parse_config_size(key, value);
    else if (key == "victim.momentum") e.victim_train.momentum = parse_config_double(key, value);
    else if (key == "victim.batch_size") e.victim_train.batch_size = parse_config_size(key, value);
    else if (key == "victim.weighted") e.victim_weighted = parse_config_bool(key, value);
    else if (key == "defense") e.defense = parse_defense(value);

    else if (key == "pool.kind") e.pool_kind = parse_pool_kind(value);
    else if (key == "pool.labels") e.pool_labels = parse_config_size(key, value);
    else if (key == "pool.size") e.pool_size = parse_config_size(key, value);
    else if (key == "pool.wild_style") e.wild_style = parse_wild_style(value);
    else if (key == "pool.analog_fraction") e.analog_fraction = parse_config_double(key, value);
    else if (key == "pool.analog_shift") e.analog_shift = parse_config_double(key, value);
    else if (key == "pool.wild_sigma_scale") e.wild_sigma_scale = parse_config_double(key, value);
    else if (key == "pool.wild_radius_scale") e.wild_radius_scale = parse_config_double(key, value);
    else if (key == "pool.n_coarse") e.n_coarse = parse_config_size(key, value);

    else if (key == "overlap.enabled") e.overlap_filter = parse_config_bool(key, value);
    else if (key == "overlap.tau_data") e.overlap.tau_data = parse_config_double(key, value);
    else if (key == "overlap.tau_labels") e.overlap.tau_labels = parse_config_double(key, value);

    else if (key == "attack.strategy") e.attack.strategy = parse_strategy(value);
    else if (key == "attack.budget") e.attack.budget = parse_config_size(key, value);
    else if (key == "attack.batch_size") e.attack.batch_size = parse_config_size(key, value);
    else if (key == "attack.rewards") e.attack.rewards.signals = parse_reward_signals(value);
    else if (key == "attack.window") e.attack.rewards.window = parse_config_size(key, value);
    else if (key == "attack.online_lr") e.attack.online_lr = parse_config_double(key, value);
    else if (key == "attack.online_momentum") e.attack.online_momentum = parse_config_double(key, value);
    else if (key == "attack.hidden") e.attack.knockoff_hidden = parse_hidden(key, value);
    else if (key == "attack.offline.epochs") e.attack.offline.epochs = parse_config_size(key, value);
    else if (key == "attack.offline.lr") e.attack.offline.base_lr = parse_config_double(key, value);
    else if (key == "attack.offline.lr_decay_factor") e.attack.offline.lr_decay_factor = parse_config_double(key, value);
    else if (key == "attack.offline.lr_decay_every") e.attack.offline.lr_decay_every = parse_config_size(key, value);
    else if (key == "attack.offline.momentum") e.attack.offline.momentum = parse_config_double(key, value);
    else if (key == "attack.offline.batch_size") e.attack.offline.batch_size = parse_config_size(key, value);
    else if (key == "attack.checkpoints") e.attack.checkpoints = parse_size_list(key, value);
    else if (key == "attack.warm_start") e.attack.warm_start = parse_config_bool(key, value);
    else if (key == "attack.warm_start_epochs") e.attack.warm_start_epochs = parse_config_size(key, value);

    else if (key == "sweep.kind") s.kind = parse_sweep_kind(value);
    else if (key == "sweep.defenses") {
      s.defenses.clear();
      for (const auto& part : split_list(value, ',')) s.defenses.push_back(parse_defense(part));
    } else if (key == "sweep.capacities") {
      s.capacities.clear();
      for (const auto& part : split_list(value, ',')) s.capacities.push_back(parse_hidden(key, part));
    } else if (key == "sweep.tau_data") s.tau_data = parse_double_list(key, value);
    else if (key == "sweep.tau_labels") s.tau_labels = parse_double_list(key, value);

    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    // grammar helpers from other modules throw invalid_argument
    throw ConfigError(key + ": " + ex.what());
  }
}

// `key = value` override as passed on the command line.
inline void apply_override(ConfigFile& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  std::string key = detail::trim(assignment.substr(0, eq));
  std::string value = detail::trim(assignment.substr(eq + 1));
  if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
  if (key == "version") throw ConfigError("version cannot be overridden");
  apply_config_key(cfg, key, value);
}

// Flat `key = value` text, one assignment per line, `#` comments, mandatory
// `version = 1` line.
inline ConfigFile parse_config(const std::string& text, const std::string& origin = "<config>") {
  ConfigFile cfg;
  bool version_seen = false;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key == "version") {
      if (detail::parse_config_u64(key, value) != 1)
        throw ConfigError(origin + ": unsupported config version '" + value + "'");
      version_seen = true;
      continue;
    }
    try {
      apply_config_key(cfg, key, value);
    } catch (const ConfigError& ex) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!version_seen) throw ConfigError(origin + ": missing mandatory 'version = 1' line");
  return cfg;
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace knockoff
