#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "knockoff/blackbox.hpp"
#include "knockoff/dataset.hpp"
#include "knockoff/errors.hpp"
#include "knockoff/metrics.hpp"
#include "knockoff/policy.hpp"
#include "knockoff/rewards.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/training.hpp"
#include "knockoff/victim.hpp"

namespace knockoff {

enum class Strategy { random, adaptive, adaptive_flat };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "random") return Strategy::random;
  if (s == "adaptive") return Strategy::adaptive;
  if (s == "adaptive_flat") return Strategy::adaptive_flat;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

inline std::string format_strategy(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::adaptive: return "adaptive";
    case Strategy::adaptive_flat: return "adaptive_flat";
  }
  throw std::invalid_argument("bad strategy");
}

// One queried sample: what was asked, what came back, and when.
struct TransferEntry {
  std::vector<double> features;
  std::vector<double> target;  // defended victim output
  std::uint32_t z = 0;
  std::size_t step = 0;  // 1-based query order
};

struct TransferSet {
  std::size_t d_in = 0;
  std::size_t k = 0;
  std::vector<std::string> z_names;
  std::vector<TransferEntry> entries;
  bool exhausted_early = false;
};

inline void save_transfer(const TransferSet& t, const std::string& path) {
  DatasetFile f;
  f.d_in = t.d_in;
  f.k = t.k;
  f.z_names = t.z_names;
  f.samples.reserve(t.entries.size());
  f.targets.reserve(t.entries.size());
  for (const auto& e : t.entries) {
    LabeledSample s;
    s.features = e.features;
    s.victim_label = -1;  // the adversary never holds ground truth
    s.adversary_label = e.z;
    f.samples.push_back(std::move(s));
    f.targets.push_back(e.target);
  }
  save_dataset_file(f, path);
}

inline TransferSet load_transfer(const std::string& path) {
  DatasetFile f = load_dataset_file(path);
  if (f.targets.size() != f.samples.size()) throw IoError(path + ": transfer file without targets");
  TransferSet t;
  t.d_in = f.d_in;
  t.k = f.k;
  t.z_names = std::move(f.z_names);
  t.entries.reserve(f.samples.size());
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    TransferEntry e;
    e.features = std::move(f.samples[i].features);
    e.target = std::move(f.targets[i]);
    e.z = f.samples[i].adversary_label;
    e.step = i + 1;  // order on disk is query order
    t.entries.push_back(std::move(e));
  }
  return t;
}

struct AttackConfig {
  Strategy strategy = Strategy::random;
  std::size_t budget = 0;
  std::size_t batch_size = 4;  // queries per policy step
  RewardConfig rewards;
  double online_lr = 0.0005;
  double online_momentum = 0.5;
  std::vector<std::size_t> knockoff_hidden = {64};
  TrainConfig offline;               // from-scratch retraining recipe
  std::vector<std::size_t> checkpoints;  // strictly increasing, each <= budget
  bool warm_start = false;           // pretrain hidden layers on pool z labels
  std::size_t warm_start_epochs = 10;

  AttackConfig() {
    offline.epochs = 60;
    offline.base_lr = 0.01;
    offline.lr_decay_factor = 0.1;
    offline.lr_decay_every = 60;
    offline.momentum = 0.5;
    offline.batch_size = 32;
  }
};

inline void validate_attack_config(const AttackConfig& cfg, std::size_t pool_size) {
  if (cfg.batch_size == 0) throw std::invalid_argument("attack: batch_size must be positive");
  if (cfg.budget > pool_size)
    throw PoolExhausted("attack: budget " + std::to_string(cfg.budget) + " exceeds pool of " +
                        std::to_string(pool_size));
  for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
    if (cfg.checkpoints[i] == 0 || cfg.checkpoints[i] > cfg.budget)
      throw std::invalid_argument("attack: checkpoint outside (0, budget]");
    if (i > 0 && cfg.checkpoints[i] <= cfg.checkpoints[i - 1])
      throw std::invalid_argument("attack: checkpoints must be strictly increasing");
  }
}

// Uniform draw of `budget` distinct samples, queried in draw order.
inline TransferSet construct_random(const SamplePool& pool, VictimBlackbox& bb, std::size_t budget,
                                    Rng& rng) {
  if (budget > pool.samples.size())
    throw PoolExhausted("construct_random: budget exceeds pool size");
  TransferSet t;
  t.d_in = pool.d_in;
  t.k = bb.output_dim();
  t.z_names = pool.z_names;
  if (budget == 0) return t;

  std::vector<std::size_t> order(pool.samples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (std::size_t i = 0; i < budget; ++i) {
    const auto& s = pool.samples[order[i]];
    TransferEntry e;
    e.features = s.features;
    e.target = bb.query_one(s.features);
    e.z = s.adversary_label;
    e.step = i + 1;
    t.entries.push_back(std::move(e));
  }
  return t;
}

namespace detail {
inline MlpModel fresh_knockoff(std::size_t d_in, std::size_t k, const std::vector<std::size_t>& hidden,
                               Rng& rng) {
  std::vector<std::size_t> dims;
  dims.push_back(d_in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(k);
  MlpModel m = make_mlp(dims);
  glorot_init(m, rng);
  return m;
}
}  // namespace detail

// Optional head start for the knockoff: fit the pool's own z labels, then
// swap in a fresh output layer for the victim's classes.
inline MlpModel warm_start_knockoff(const SamplePool& pool, std::size_t k,
                                    const std::vector<std::size_t>& hidden, std::size_t epochs,
                                    Rng& rng) {
  if (hidden.empty()) throw std::invalid_argument("warm_start_knockoff: needs at least one hidden layer");
  MlpModel pre = detail::fresh_knockoff(pool.d_in, pool.n_z(), hidden, rng);
  std::vector<std::vector<double>> xs, ts;
  xs.reserve(pool.samples.size());
  for (const auto& s : pool.samples) {
    xs.push_back(s.features);
    std::vector<double> t(pool.n_z(), 0.0);
    t[s.adversary_label] = 1.0;
    ts.push_back(std::move(t));
  }
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.base_lr = 0.01;
  cfg.batch_size = 32;
  train_model(pre, xs, ts, nullptr, cfg, rng);

  // keep the trained trunk, re-roll the head
  std::vector<std::size_t> dims = pre.layer_dims;
  dims.back() = k;
  MlpModel out = make_mlp(dims);
  for (std::size_t l = 0; l + 1 < pre.n_layers(); ++l) {
    out.weights[l] = pre.weights[l];
    out.biases[l] = pre.biases[l];
  }
  double limit = std::sqrt(6.0 / static_cast<double>(out.weights.back().rows + out.weights.back().cols));
  for (double& v : out.weights.back().data) v = rng.uniform(-limit, limit);
  return out;
}

struct AdaptiveResult {
  TransferSet transfer;
  MlpModel online_model;
};

// Bandit-driven construction. Each step samples a label path, queries up to
// batch_size of that label's unqueried samples, takes one online SGD step on
// the answers, and feeds the reward back into the policy. Labels that run dry
// are masked and resampled without an update; if everything is masked before
// the budget is spent the transfer set comes back short with
// exhausted_early set.
inline AdaptiveResult construct_adaptive(const SamplePool& pool, VictimBlackbox& bb, PolicyTree& tree,
                                         RewardState& rewards, const AttackConfig& cfg, Rng& rng) {
  if (tree.leaf_paths.size() != pool.n_z())
    throw std::invalid_argument("construct_adaptive: policy does not cover the pool's labels");

  AdaptiveResult out;
  TransferSet& t = out.transfer;
  t.d_in = pool.d_in;
  t.k = bb.output_dim();
  t.z_names = pool.z_names;

  out.online_model = cfg.warm_start
                         ? warm_start_knockoff(pool, t.k, cfg.knockoff_hidden, cfg.warm_start_epochs, rng)
                         : detail::fresh_knockoff(pool.d_in, t.k, cfg.knockoff_hidden, rng);
  OptimizerState opt = OptimizerState::for_model(out.online_model, cfg.online_momentum);

  std::vector<std::vector<std::size_t>> avail(pool.n_z());
  for (std::size_t i = 0; i < pool.samples.size(); ++i)
    avail[pool.samples[i].adversary_label].push_back(i);
  for (std::size_t z = 0; z < pool.n_z(); ++z)
    if (avail[z].empty()) mask_action(tree, z);

  bool need_knockoff_outputs =
      std::find(cfg.rewards.signals.begin(), cfg.rewards.signals.end(), RewardSignal::loss) !=
      cfg.rewards.signals.end();

  std::size_t queried = 0;
  while (queried < cfg.budget) {
    if (all_masked(tree)) {
      t.exhausted_early = true;
      break;
    }
    SampledPath path = sample_action(tree, rng);
    auto z = static_cast<std::size_t>(path.z);
    if (avail[z].empty()) {
      mask_action(tree, z);  // dead arm: mask and resample, no update
      continue;
    }

    std::size_t n = std::min({cfg.batch_size, cfg.budget - queried, avail[z].size()});
    std::vector<std::vector<double>> xs;
    xs.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t pick = rng.below(avail[z].size());
      std::size_t idx = avail[z][pick];
      avail[z][pick] = avail[z].back();
      avail[z].pop_back();
      xs.push_back(pool.samples[idx].features);
    }
    auto ys = bb.query(xs);
    for (std::size_t j = 0; j < n; ++j) {
      TransferEntry e;
      e.features = xs[j];
      e.target = ys[j];
      e.z = static_cast<std::uint32_t>(z);
      e.step = ++queried;
      t.entries.push_back(std::move(e));
    }

    std::vector<std::vector<double>> kouts;
    if (need_knockoff_outputs) {
      kouts.reserve(n);
      for (const auto& x : xs) kouts.push_back(forward(out.online_model, x));
    }

    // one online step on this batch, then credit the policy
    std::vector<std::size_t> batch_idx(n);
    std::iota(batch_idx.begin(), batch_idx.end(), 0);
    sgd_minibatch_step(out.online_model, batch_idx, xs, ys, nullptr, opt, cfg.online_lr);

    auto sr = rewards.observe_step(ys, kouts);
    update_policy(tree, path, sr.r, sr.baseline);
  }
  return out;
}

// From-scratch distillation on the transfer set (soft targets).
inline MlpModel train_knockoff_offline(const TransferSet& t, const std::vector<std::size_t>& hidden,
                                       const TrainConfig& cfg, Rng& rng) {
  if (t.entries.empty()) throw std::invalid_argument("train_knockoff_offline: empty transfer set");
  MlpModel m = detail::fresh_knockoff(t.d_in, t.k, hidden, rng);
  std::vector<std::vector<double>> xs, ts;
  xs.reserve(t.entries.size());
  for (const auto& e : t.entries) {
    xs.push_back(e.features);
    ts.push_back(e.target);
  }
  train_model(m, xs, ts, nullptr, cfg, rng);
  return m;
}

struct CurvePoint {
  std::size_t budget = 0;
  double top1 = 0.0;
  double relative = 0.0;
};

struct AttackReport {
  Strategy strategy = Strategy::random;
  DefensePolicy defense;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  double final_top1 = 0.0;
  double victim_top1 = 0.0;
  PerClassStats per_class;
  std::vector<char> class_seen;  // pseudo-label coverage from the transfer set
  std::vector<PolicySnapshotRow> policy_snapshot;
  std::size_t query_count = 0;
  bool exhausted_early = false;
  double wall_time_sec = 0.0;  // console diagnostics only, never written to artifacts
  TransferSet transfer;
  MlpModel final_model;
};

// Full attack: build the transfer set with the configured strategy, then
// retrain an independent knockoff from scratch at every checkpoint (fresh
// seed stream per checkpoint, prefix of the transfer set up to that budget).
// The final model is the full-budget retrain.
inline AttackReport run_attack(const SamplePool& pool, const Hierarchy& hierarchy, VictimBlackbox& bb,
                               const Dataset& victim_test, double victim_top1, const AttackConfig& cfg,
                               std::uint64_t seed) {
  validate_attack_config(cfg, pool.samples.size());
  auto t0 = std::chrono::steady_clock::now();

  AttackReport rep;
  rep.strategy = cfg.strategy;
  rep.defense = bb.defense();
  rep.seed = seed;
  rep.victim_top1 = victim_top1;

  std::size_t count_before = bb.query_count();
  Rng attack_rng(seed, "attack");
  PolicyTree tree;
  switch (cfg.strategy) {
    case Strategy::random: {
      rep.transfer = construct_random(pool, bb, cfg.budget, attack_rng);
      break;
    }
    case Strategy::adaptive:
    case Strategy::adaptive_flat: {
      tree = cfg.strategy == Strategy::adaptive ? policy_from_hierarchy(hierarchy, pool.n_z())
                                                : policy_flat(pool.z_names);
      RewardState rewards(cfg.rewards, bb.output_dim());
      auto res = construct_adaptive(pool, bb, tree, rewards, cfg, attack_rng);
      rep.transfer = std::move(res.transfer);
      rep.policy_snapshot = policy_snapshot(tree);
      break;
    }
  }
  rep.query_count = bb.query_count() - count_before;
  rep.exhausted_early = rep.transfer.exhausted_early;

  rep.class_seen.assign(bb.output_dim(), 0);
  for (const auto& e : rep.transfer.entries)
    rep.class_seen[static_cast<std::size_t>(argmax_index(e.target))] = 1;

  // the curve always ends with the full budget, so the final model is the
  // complete-transfer-set retrain
  std::vector<std::size_t> checkpoints = cfg.checkpoints;
  if (cfg.budget > 0 && (checkpoints.empty() || checkpoints.back() < cfg.budget))
    checkpoints.push_back(cfg.budget);

  for (std::size_t b : checkpoints) {
    TransferSet prefix;
    prefix.d_in = rep.transfer.d_in;
    prefix.k = rep.transfer.k;
    prefix.z_names = rep.transfer.z_names;
    std::size_t take = std::min<std::size_t>(b, rep.transfer.entries.size());
    prefix.entries.assign(rep.transfer.entries.begin(),
                          rep.transfer.entries.begin() + static_cast<std::ptrdiff_t>(take));
    Rng ck_rng(seed, "offline/" + std::to_string(b));
    MlpModel m = train_knockoff_offline(prefix, cfg.knockoff_hidden, cfg.offline, ck_rng);
    CurvePoint pt;
    pt.budget = b;
    pt.top1 = top1_accuracy(m, victim_test);
    pt.relative = victim_top1 > 0.0 ? pt.top1 / victim_top1 : 0.0;
    rep.curve.push_back(pt);
    if (b == checkpoints.back()) {
      rep.final_model = std::move(m);
      rep.final_top1 = pt.top1;
    }
  }
  if (!rep.curve.empty()) {
    rep.per_class = per_class_stats(rep.final_model, victim_test);
  }

  rep.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace knockoff
