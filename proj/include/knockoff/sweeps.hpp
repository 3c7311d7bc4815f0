#pragma once

#include <atomic>
#include <cstring>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "knockoff/config.hpp"
#include "knockoff/experiment.hpp"
#include "knockoff/report.hpp"

namespace knockoff {

// FNV-1a over dims and raw parameter bytes; used to prove sweeps leave the
// shared victim untouched.
inline std::uint64_t model_digest(const MlpModel& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (std::size_t d : m.layer_dims) mix(&d, sizeof(d));
  for (const auto& w : m.weights) mix(w.data.data(), w.data.size() * sizeof(double));
  for (const auto& b : m.biases) mix(b.data(), b.size() * sizeof(double));
  return h;
}

namespace detail {

// index-parallel loop; results must be written to per-index slots. The first
// member failure is rethrown after all threads join.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (jobs <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  std::size_t n_threads = std::min(jobs, n);
  threads.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string hidden_label(const std::vector<std::size_t>& hidden) {
  std::string out;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i > 0) out += 'x';
    out += std::to_string(hidden[i]);
  }
  return out;
}

}  // namespace detail

// Shared immutable base for sweep members: data, pool, victim. Built exactly
// like the run_experiment front half so a sweep member with the same settings
// reproduces a standalone run bit-for-bit.
struct PreparedRun {
  Dataset train;
  Dataset test;
  SamplePool pool;
  Hierarchy hierarchy;
  MlpModel victim;
  double victim_top1 = 0.0;
};

inline PreparedRun prepare_run(const ExperimentConfig& cfg, bool apply_overlap_filter) {
  PreparedRun p;
  auto split = gen_synthetic(victim_spec(cfg));
  p.train = std::move(split.train);
  p.test = std::move(split.test);
  auto bundle = build_pool(cfg, p.train);
  p.hierarchy = std::move(bundle.hierarchy);
  p.pool = apply_overlap_filter ? semi_open_filter(bundle.pool, p.train, cfg.overlap, cfg.seed)
                                : std::move(bundle.pool);
  p.victim = build_victim(cfg, p.train);
  p.victim_top1 = top1_accuracy(p.victim, p.test);
  return p;
}

inline PreparedRun prepare_run(const ExperimentConfig& cfg) {
  return prepare_run(cfg, cfg.overlap_filter);
}

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<AttackReport> reports;  // capacity sweeps carry no member reports
};

// Same seed and budget across members; only the blackbox's defense varies.
inline SweepResult defense_sweep(const ExperimentConfig& cfg, const PreparedRun& base,
                                 const std::vector<DefensePolicy>& defenses, std::size_t jobs) {
  if (defenses.empty()) throw ConfigError("sweep.defenses: empty grid");
  SweepResult res;
  res.rows.resize(defenses.size());
  res.reports.resize(defenses.size());
  detail::parallel_for(defenses.size(), jobs, [&](std::size_t i) {
    VictimBlackbox bb(base.victim, defenses[i]);
    AttackReport rep =
        run_attack(base.pool, base.hierarchy, bb, base.test, base.victim_top1, cfg.attack, cfg.seed);
    res.rows[i] = {format_defense(defenses[i]), rep.final_top1,
                   base.victim_top1 > 0.0 ? rep.final_top1 / base.victim_top1 : 0.0};
    res.reports[i] = std::move(rep);
  });
  return res;
}

// One transfer set, many knockoff architectures retrained from it.
inline SweepResult capacity_sweep(const ExperimentConfig& cfg, const PreparedRun& base,
                                  const std::vector<std::vector<std::size_t>>& capacities,
                                  std::size_t jobs) {
  if (capacities.empty()) throw ConfigError("sweep.capacities: empty grid");
  validate_attack_config(cfg.attack, base.pool.samples.size());

  VictimBlackbox bb(base.victim, cfg.defense);
  Rng attack_rng(cfg.seed, "attack");
  TransferSet transfer;
  switch (cfg.attack.strategy) {
    case Strategy::random:
      transfer = construct_random(base.pool, bb, cfg.attack.budget, attack_rng);
      break;
    case Strategy::adaptive:
    case Strategy::adaptive_flat: {
      PolicyTree tree = cfg.attack.strategy == Strategy::adaptive
                            ? policy_from_hierarchy(base.hierarchy, base.pool.n_z())
                            : policy_flat(base.pool.z_names);
      RewardState rewards(cfg.attack.rewards, bb.output_dim());
      transfer = construct_adaptive(base.pool, bb, tree, rewards, cfg.attack, attack_rng).transfer;
      break;
    }
  }

  SweepResult res;
  res.rows.resize(capacities.size());
  detail::parallel_for(capacities.size(), jobs, [&](std::size_t i) {
    std::string label = detail::hidden_label(capacities[i]);
    Rng rng(cfg.seed, "offline/capacity/" + label);
    MlpModel m = train_knockoff_offline(transfer, capacities[i], cfg.attack.offline, rng);
    double top1 = top1_accuracy(m, base.test);
    res.rows[i] = {label, top1, base.victim_top1 > 0.0 ? top1 / base.victim_top1 : 0.0};
  });
  return res;
}

// Full attack per (tau_data, tau_labels) cell on a freshly filtered pool.
// base must hold the unfiltered pool.
inline SweepResult semi_open_sweep(const ExperimentConfig& cfg, const PreparedRun& base,
                                   const std::vector<double>& tau_data,
                                   const std::vector<double>& tau_labels, std::size_t jobs) {
  if (tau_data.empty() || tau_labels.empty()) throw ConfigError("sweep.tau grids: empty grid");
  struct Cell {
    double td, tl;
  };
  std::vector<Cell> cells;
  for (double tl : tau_labels)
    for (double td : tau_data) cells.push_back({td, tl});

  SweepResult res;
  res.rows.resize(cells.size());
  res.reports.resize(cells.size());
  detail::parallel_for(cells.size(), jobs, [&](std::size_t i) {
    OverlapConfig oc;
    oc.tau_data = cells[i].td;
    oc.tau_labels = cells[i].tl;
    SamplePool filtered = semi_open_filter(base.pool, base.train, oc, cfg.seed);
    VictimBlackbox bb(base.victim, cfg.defense);
    AttackReport rep =
        run_attack(filtered, base.hierarchy, bb, base.test, base.victim_top1, cfg.attack, cfg.seed);
    std::string label =
        "tau_data=" + format_real(cells[i].td) + ";tau_labels=" + format_real(cells[i].tl);
    res.rows[i] = {label, rep.final_top1,
                   base.victim_top1 > 0.0 ? rep.final_top1 / base.victim_top1 : 0.0};
    res.reports[i] = std::move(rep);
  });
  return res;
}

// overlap sweeps filter per member, so their base pool must stay unfiltered
inline PreparedRun prepare_for_sweep(const ConfigFile& cfg) {
  bool filter = cfg.sweep.kind == SweepKind::overlap ? false : cfg.experiment.overlap_filter;
  return prepare_run(cfg.experiment, filter);
}

inline SweepResult run_sweep(const ConfigFile& cfg, const PreparedRun& base, std::size_t jobs) {
  switch (cfg.sweep.kind) {
    case SweepKind::defense: return defense_sweep(cfg.experiment, base, cfg.sweep.defenses, jobs);
    case SweepKind::capacity:
      return capacity_sweep(cfg.experiment, base, cfg.sweep.capacities, jobs);
    case SweepKind::overlap:
      return semi_open_sweep(cfg.experiment, base, cfg.sweep.tau_data, cfg.sweep.tau_labels, jobs);
  }
  throw ConfigError("bad sweep kind");
}

}  // namespace knockoff
