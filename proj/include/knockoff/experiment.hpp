#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "knockoff/attack.hpp"
#include "knockoff/blackbox.hpp"
#include "knockoff/dataset.hpp"
#include "knockoff/hierarchy.hpp"
#include "knockoff/metrics.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/victim.hpp"

namespace knockoff {

enum class PoolKind { victim_data, closed_world, open_world };
enum class WildStyle { auto_style, orthogonal, spanning };

inline PoolKind parse_pool_kind(const std::string& s) {
  if (s == "victim_data") return PoolKind::victim_data;
  if (s == "closed_world") return PoolKind::closed_world;
  if (s == "open_world") return PoolKind::open_world;
  throw std::invalid_argument("unknown pool kind '" + s + "'");
}

inline std::string format_pool_kind(PoolKind k) {
  switch (k) {
    case PoolKind::victim_data: return "victim_data";
    case PoolKind::closed_world: return "closed_world";
    case PoolKind::open_world: return "open_world";
  }
  throw std::invalid_argument("bad pool kind");
}

inline WildStyle parse_wild_style(const std::string& s) {
  if (s == "auto") return WildStyle::auto_style;
  if (s == "orthogonal") return WildStyle::orthogonal;
  if (s == "spanning") return WildStyle::spanning;
  throw std::invalid_argument("unknown wild style '" + s + "'");
}

inline std::string format_wild_style(WildStyle s) {
  switch (s) {
    case WildStyle::auto_style: return "auto";
    case WildStyle::orthogonal: return "orthogonal";
    case WildStyle::spanning: return "spanning";
  }
  throw std::invalid_argument("bad wild style");
}

// Everything one run needs. The victim's classes sit on the first k coordinate
// axes at class_radius; pools are built around them according to pool_kind.
struct ExperimentConfig {
  std::uint64_t seed = 1;

  // data
  std::size_t d_in = 32;
  std::size_t k = 8;
  double class_radius = 2.5;
  double sigma = 1.0;
  // modes per class > 1 scatters each class over several tight clusters at
  // random directions on the class sphere instead of one axis-aligned mean
  std::size_t modes_per_class = 1;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;

  // victim
  std::vector<std::size_t> victim_hidden = {64};
  TrainConfig victim_train;
  bool victim_weighted = true;
  DefensePolicy defense;

  // pool
  PoolKind pool_kind = PoolKind::closed_world;
  std::size_t pool_labels = 64;
  std::size_t pool_size = 8000;
  WildStyle wild_style = WildStyle::auto_style;
  double analog_fraction = 0.25;
  double analog_shift = 0.75;
  double wild_sigma_scale = 1.5;
  double wild_radius_scale = 0.35;  // orthogonal wild centers, relative to class_radius
  std::size_t n_coarse = 8;
  bool overlap_filter = false;
  OverlapConfig overlap;

  // attack
  AttackConfig attack;
};

inline DatasetSpec victim_spec(const ExperimentConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("config: need at least 2 classes");
  if (cfg.k > cfg.d_in) throw std::invalid_argument("config: k must not exceed d_in");
  if (cfg.modes_per_class == 0) throw std::invalid_argument("config: modes_per_class must be positive");
  DatasetSpec s;
  s.d_in = cfg.d_in;
  s.k = cfg.k;
  s.sigma = cfg.sigma;
  s.train_per_class = cfg.train_per_class;
  s.test_per_class = cfg.test_per_class;
  s.seed = substream_seed(cfg.seed, "data");
  if (cfg.modes_per_class == 1) {
    s.class_means.assign(cfg.k, std::vector<double>(cfg.d_in, 0.0));
    for (std::size_t c = 0; c < cfg.k; ++c) s.class_means[c][c] = cfg.class_radius;
  } else {
    Rng rng(cfg.seed, "data/modes");
    s.class_modes.resize(cfg.k);
    for (std::size_t c = 0; c < cfg.k; ++c) {
      for (std::size_t m = 0; m < cfg.modes_per_class; ++m) {
        std::vector<double> dir(cfg.d_in);
        double norm = 0.0;
        for (double& v : dir) {
          v = rng.gaussian();
          norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : dir) v *= cfg.class_radius / norm;
        s.class_modes[c].push_back(std::move(dir));
      }
    }
  }
  return s;
}

// All cluster centers the victim's data is drawn around: the class means in
// the single-mode world, every mode otherwise.
inline std::vector<std::vector<double>> class_anchors(const DatasetSpec& spec) {
  if (spec.class_modes.empty()) return spec.class_means;
  std::vector<std::vector<double>> anchors;
  for (const auto& modes : spec.class_modes)
    for (const auto& m : modes) anchors.push_back(m);
  return anchors;
}

namespace detail {

// Unit vectors confined to the coordinate axes the victim's classes never
// use. Wild labels placed along them are feature-disjoint from every class
// direction, so the victim has nothing informative to say about them.
inline std::vector<std::vector<double>> orthogonal_directions(std::size_t d_in, std::size_t k,
                                                              std::size_t count) {
  std::vector<std::vector<double>> dirs;
  auto axis = [&](std::size_t a, double sign) {
    std::vector<double> v(d_in, 0.0);
    v[a] = sign;
    return v;
  };
  for (std::size_t a = k; a < d_in && dirs.size() < count; ++a) dirs.push_back(axis(a, 1.0));
  for (std::size_t a = k; a < d_in && dirs.size() < count; ++a) dirs.push_back(axis(a, -1.0));
  double inv = 1.0 / std::sqrt(2.0);
  for (std::size_t a = k; a + 1 < d_in && dirs.size() < count; ++a) {
    auto v = axis(a, inv);
    v[a + 1] = inv;
    dirs.push_back(std::move(v));
  }
  for (std::size_t a = k; a + 1 < d_in && dirs.size() < count; ++a) {
    auto v = axis(a, inv);
    v[a + 1] = -inv;
    dirs.push_back(std::move(v));
  }
  if (dirs.size() < count)
    throw std::invalid_argument("config: not enough orthogonal wild directions; raise d_in or cut pool labels");
  return dirs;
}

inline std::vector<std::size_t> split_counts(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> counts(parts, parts == 0 ? 0 : total / parts);
  for (std::size_t i = 0; i < (parts == 0 ? 0 : total % parts); ++i) counts[i] += 1;
  return counts;
}

inline LabeledSample gaussian_sample(const std::vector<double>& center, double sigma,
                                     std::uint32_t local_z, Rng& rng) {
  LabeledSample s;
  s.features.resize(center.size());
  for (std::size_t j = 0; j < center.size(); ++j) s.features[j] = center[j] + sigma * rng.gaussian();
  s.adversary_label = local_z;
  return s;
}

}  // namespace detail

struct PoolBundle {
  SamplePool pool;
  Hierarchy hierarchy;
};

inline PoolBundle build_pool(const ExperimentConfig& cfg, const Dataset& victim_train) {
  PoolBundle out;
  Rng rng(cfg.seed, "pool");
  auto spec = victim_spec(cfg);

  WildStyle style = cfg.wild_style;
  if (style == WildStyle::auto_style)
    style = cfg.pool_kind == PoolKind::open_world ? WildStyle::spanning : WildStyle::orthogonal;

  // Wild sample makers, shared by the closed and open worlds. Spanning wilds
  // sit on segments between victim cluster centers.
  auto anchors = class_anchors(spec);
  auto spanning_center = [&]() {
    std::size_t a = rng.below(anchors.size());
    std::size_t b = rng.below(anchors.size());
    while (b == a) b = rng.below(anchors.size());
    double t = rng.uniform(0.2, 0.8);
    std::vector<double> c(cfg.d_in);
    for (std::size_t j = 0; j < cfg.d_in; ++j)
      c[j] = t * anchors[a][j] + (1.0 - t) * anchors[b][j] + 0.25 * cfg.sigma * rng.gaussian();
    return c;
  };

  switch (cfg.pool_kind) {
    case PoolKind::victim_data: {
      PoolSource src{"victim_data", victim_train.class_names, {}};
      src.samples.reserve(victim_train.samples.size());
      for (const auto& s : victim_train.samples) {
        LabeledSample c = s;
        c.adversary_label = static_cast<std::uint32_t>(s.victim_label);
        src.samples.push_back(std::move(c));
      }
      out.pool = build_universe({src});
      out.hierarchy = build_hierarchy(out.pool, std::min(cfg.n_coarse, out.pool.n_z()));
      return out;
    }

    case PoolKind::closed_world: {
      if (cfg.pool_labels <= cfg.k)
        throw std::invalid_argument("config: closed world needs more pool labels than victim classes");
      std::size_t train_total = victim_train.samples.size();
      std::size_t n_wild = cfg.pool_labels - cfg.k;
      if (cfg.pool_size < train_total + n_wild)
        throw std::invalid_argument("config: pool too small for victim data plus one sample per wild label");

      std::vector<PoolSource> sources;
      PoolSource victim_src{"victim_data", victim_train.class_names, {}};
      for (const auto& s : victim_train.samples) {
        LabeledSample c = s;
        c.adversary_label = static_cast<std::uint32_t>(s.victim_label);
        victim_src.samples.push_back(std::move(c));
      }
      sources.push_back(std::move(victim_src));

      std::vector<std::vector<double>> centers;
      if (style == WildStyle::orthogonal) {
        // wild clusters sit well inside the class radius, where the victim's
        // posterior is nearly flat: wild queries reveal little about the
        // class boundaries, so querying them is genuinely wasted budget
        auto dirs = detail::orthogonal_directions(cfg.d_in, cfg.k, n_wild);
        for (auto& d : dirs) {
          for (double& v : d) v *= cfg.class_radius * cfg.wild_radius_scale;
          centers.push_back(std::move(d));
        }
      } else {
        for (std::size_t i = 0; i < n_wild; ++i) centers.push_back(spanning_center());
      }
      double wild_sigma = style == WildStyle::orthogonal ? cfg.sigma : cfg.sigma * cfg.wild_sigma_scale;

      auto counts = detail::split_counts(cfg.pool_size - train_total, n_wild);
      // group wild labels into sources of k labels apiece so the hierarchy's
      // coarse level has victim-sized branches
      std::size_t w = 0;
      std::size_t group = 0;
      while (w < n_wild) {
        std::size_t span = std::min(cfg.k, n_wild - w);
        PoolSource src{"wild_" + std::to_string(group), {}, {}};
        for (std::size_t j = 0; j < span; ++j) {
          src.z_names.push_back("wild_" + std::to_string(group) + "_" + std::to_string(j));
          for (std::size_t i = 0; i < counts[w + j]; ++i)
            src.samples.push_back(detail::gaussian_sample(centers[w + j], wild_sigma,
                                                          static_cast<std::uint32_t>(j), rng));
        }
        sources.push_back(std::move(src));
        w += span;
        ++group;
      }
      out.hierarchy = hierarchy_from_sources(sources);
      out.pool = build_universe(sources);
      return out;
    }

    case PoolKind::open_world: {
      auto n_analog = static_cast<std::size_t>(std::llround(cfg.analog_fraction * static_cast<double>(cfg.k)));
      if (n_analog > cfg.k) throw std::invalid_argument("config: analog_fraction above 1");
      if (cfg.pool_labels <= n_analog)
        throw std::invalid_argument("config: open world needs more pool labels than analogs");
      std::size_t n_wild = cfg.pool_labels - n_analog;
      auto counts = detail::split_counts(cfg.pool_size, cfg.pool_labels);

      PoolSource src{"open_pool", {}, {}};
      // analog labels: the victim's class names, distributions shifted off
      // the real cluster centers; never the victim's own images
      for (std::size_t c = 0; c < n_analog; ++c) {
        src.z_names.push_back(victim_train.class_names[c]);
        std::vector<double> dir(cfg.d_in);
        double norm = 0.0;
        for (double& v : dir) {
          v = rng.gaussian();
          norm += v * v;
        }
        norm = std::sqrt(norm);
        std::vector<std::vector<double>> centers_c;
        if (spec.class_modes.empty())
          centers_c.push_back(spec.class_means[c]);
        else
          centers_c = spec.class_modes[c];
        for (auto& center : centers_c)
          for (std::size_t j = 0; j < cfg.d_in; ++j) center[j] += cfg.analog_shift * cfg.sigma * dir[j] / norm;
        for (std::size_t i = 0; i < counts[c]; ++i) {
          const auto& center = centers_c[centers_c.size() == 1 ? 0 : rng.below(centers_c.size())];
          src.samples.push_back(detail::gaussian_sample(center, cfg.sigma, static_cast<std::uint32_t>(c), rng));
        }
      }
      std::vector<std::vector<double>> centers;
      if (style == WildStyle::orthogonal) {
        auto dirs = detail::orthogonal_directions(cfg.d_in, cfg.k, n_wild);
        for (auto& d : dirs) {
          for (double& v : d) v *= cfg.class_radius * cfg.wild_radius_scale;
          centers.push_back(std::move(d));
        }
      } else {
        for (std::size_t i = 0; i < n_wild; ++i) centers.push_back(spanning_center());
      }
      double wild_sigma = style == WildStyle::orthogonal ? cfg.sigma : cfg.sigma * cfg.wild_sigma_scale;
      for (std::size_t i = 0; i < n_wild; ++i) {
        src.z_names.push_back("wild_" + std::to_string(i));
        auto z = static_cast<std::uint32_t>(n_analog + i);
        for (std::size_t j = 0; j < counts[n_analog + i]; ++j)
          src.samples.push_back(detail::gaussian_sample(centers[i], wild_sigma, z, rng));
      }
      out.pool = build_universe({src});
      out.hierarchy = build_hierarchy(out.pool, std::min(cfg.n_coarse, out.pool.n_z()));
      return out;
    }
  }
  throw std::invalid_argument("config: bad pool kind");
}

inline MlpModel build_victim(const ExperimentConfig& cfg, const Dataset& train) {
  VictimConfig vc;
  vc.hidden = cfg.victim_hidden;
  vc.train = cfg.victim_train;
  vc.weighted_loss = cfg.victim_weighted;
  Rng rng(cfg.seed, "victim");
  return train_victim(train, vc, rng);
}

struct ExperimentResult {
  Dataset victim_train;
  Dataset victim_test;
  SamplePool pool;
  Hierarchy hierarchy;
  MlpModel victim;
  double victim_top1 = 0.0;
  AttackReport report;
};

// Data -> pool (-> overlap filter) -> victim -> blackbox -> attack. Every
// stage draws from its own named stream off cfg.seed, so any stage rerun in
// isolation reproduces bit-identical output.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res;
  auto split = gen_synthetic(victim_spec(cfg));
  res.victim_train = std::move(split.train);
  res.victim_test = std::move(split.test);

  auto bundle = build_pool(cfg, res.victim_train);
  res.hierarchy = std::move(bundle.hierarchy);
  res.pool = cfg.overlap_filter
                 ? semi_open_filter(bundle.pool, res.victim_train, cfg.overlap, cfg.seed)
                 : std::move(bundle.pool);

  res.victim = build_victim(cfg, res.victim_train);
  res.victim_top1 = top1_accuracy(res.victim, res.victim_test);

  VictimBlackbox bb(res.victim, cfg.defense);
  res.report = run_attack(res.pool, res.hierarchy, bb, res.victim_test, res.victim_top1, cfg.attack,
                          cfg.seed);
  return res;
}

}  // namespace knockoff
