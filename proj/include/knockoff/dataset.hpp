#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "knockoff/errors.hpp"
#include "knockoff/io.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

// victim_label is -1 wherever ground truth is absent or deliberately hidden;
// adversary_label is always a valid index into the owning pool's z_names.
struct LabeledSample {
  std::vector<double> features;
  int victim_label = -1;
  std::uint32_t adversary_label = 0;
};

// Ground-truth labeled data, only ever seen by the victim's side of the fence.
struct Dataset {
  std::size_t d_in = 0;
  std::size_t k = 0;
  std::vector<std::string> class_names;
  std::vector<LabeledSample> samples;
};

// The adversary's unlabeled universe. Samples carry adversary labels z but no
// victim ground truth.
struct SamplePool {
  std::size_t d_in = 0;
  std::vector<std::string> z_names;
  std::vector<LabeledSample> samples;

  std::size_t n_z() const { return z_names.size(); }
};

struct DatasetSpec {
  std::size_t d_in = 0;
  std::size_t k = 0;
  std::vector<std::vector<double>> class_means;
  // multi-modal alternative to class_means: class c draws from a uniformly
  // chosen mode in class_modes[c]; exactly one of the two must be populated
  std::vector<std::vector<std::vector<double>>> class_modes;
  double sigma = 1.0;
  std::size_t train_per_class = 0;
  std::size_t test_per_class = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;  // defaults to class_<k>
};

inline void validate_spec(const DatasetSpec& s) {
  if (s.d_in == 0 || s.k == 0) throw std::invalid_argument("DatasetSpec: zero dimensions");
  if (s.class_modes.empty()) {
    if (s.class_means.size() != s.k) throw std::invalid_argument("DatasetSpec: need one mean per class");
    for (const auto& m : s.class_means)
      if (m.size() != s.d_in) throw std::invalid_argument("DatasetSpec: mean dimension mismatch");
  } else {
    if (!s.class_means.empty())
      throw std::invalid_argument("DatasetSpec: class_means and class_modes are exclusive");
    if (s.class_modes.size() != s.k)
      throw std::invalid_argument("DatasetSpec: need one mode list per class");
    for (const auto& modes : s.class_modes) {
      if (modes.empty()) throw std::invalid_argument("DatasetSpec: class without modes");
      for (const auto& m : modes)
        if (m.size() != s.d_in) throw std::invalid_argument("DatasetSpec: mode dimension mismatch");
    }
  }
  if (!(s.sigma > 0.0)) throw std::invalid_argument("DatasetSpec: sigma must be positive");
  if (!s.class_names.empty() && s.class_names.size() != s.k)
    throw std::invalid_argument("DatasetSpec: class_names size mismatch");
}

inline std::vector<std::string> default_class_names(const DatasetSpec& s) {
  if (!s.class_names.empty()) return s.class_names;
  std::vector<std::string> names;
  names.reserve(s.k);
  for (std::size_t i = 0; i < s.k; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Isotropic Gaussian blob per class. Same spec and seed give bit-identical
// data; the draw order (per class: train then test, each sample dimension by
// dimension) is part of that contract.
inline TrainTestSplit gen_synthetic(const DatasetSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed, "gen-data");
  TrainTestSplit out;
  auto names = default_class_names(spec);
  for (Dataset* d : {&out.train, &out.test}) {
    d->d_in = spec.d_in;
    d->k = spec.k;
    d->class_names = names;
  }
  auto draw = [&](std::size_t cls) {
    const std::vector<double>* mean = nullptr;
    if (spec.class_modes.empty()) {
      mean = &spec.class_means[cls];
    } else {
      const auto& modes = spec.class_modes[cls];
      mean = &modes[modes.size() == 1 ? 0 : rng.below(modes.size())];
    }
    LabeledSample s;
    s.features.resize(spec.d_in);
    for (std::size_t j = 0; j < spec.d_in; ++j)
      s.features[j] = (*mean)[j] + spec.sigma * rng.gaussian();
    s.victim_label = static_cast<int>(cls);
    s.adversary_label = static_cast<std::uint32_t>(cls);
    return s;
  };
  for (std::size_t cls = 0; cls < spec.k; ++cls) {
    for (std::size_t i = 0; i < spec.train_per_class; ++i) out.train.samples.push_back(draw(cls));
    for (std::size_t i = 0; i < spec.test_per_class; ++i) out.test.samples.push_back(draw(cls));
  }
  return out;
}

// Percentage of victim class names that also appear as pool labels; matching
// is exact string equality.
inline double label_overlap(const std::vector<std::string>& victim_classes,
                            const std::vector<std::string>& pool_labels) {
  if (victim_classes.empty()) throw std::invalid_argument("label_overlap: no victim classes");
  std::unordered_set<std::string> pool(pool_labels.begin(), pool_labels.end());
  std::size_t hit = 0;
  for (const auto& name : victim_classes) hit += pool.count(name);
  return 100.0 * static_cast<double>(hit) / static_cast<double>(victim_classes.size());
}

// One labeled source in a multi-source universe; adversary labels are local
// to the source until build_universe assigns the global z space.
struct PoolSource {
  std::string name;
  std::vector<std::string> z_names;
  std::vector<LabeledSample> samples;
};

// Concatenates sources into one pool. Global z ids follow source order, so
// source s's label j becomes offset(s) + j. Victim labels are dropped: the
// pool is what the adversary sees.
inline SamplePool build_universe(const std::vector<PoolSource>& sources) {
  if (sources.empty()) throw std::invalid_argument("build_universe: no sources");
  SamplePool pool;
  std::size_t offset = 0;
  for (const auto& src : sources) {
    if (src.z_names.empty()) throw std::invalid_argument("build_universe: source without labels");
    for (const auto& s : src.samples) {
      if (s.adversary_label >= src.z_names.size())
        throw std::invalid_argument("build_universe: sample label out of range in source " + src.name);
      if (pool.d_in == 0) pool.d_in = s.features.size();
      if (s.features.size() != pool.d_in)
        throw std::invalid_argument("build_universe: feature dimension mismatch in source " + src.name);
      LabeledSample copy = s;
      copy.victim_label = -1;
      copy.adversary_label = static_cast<std::uint32_t>(offset + copy.adversary_label);
      pool.samples.push_back(std::move(copy));
    }
    pool.z_names.insert(pool.z_names.end(), src.z_names.begin(), src.z_names.end());
    offset += src.z_names.size();
  }
  if (pool.samples.empty()) throw std::invalid_argument("build_universe: empty universe");
  return pool;
}

// --- semi-open world filtering ----------------------------------------------

struct OverlapConfig {
  double tau_data = 1.0;    // fraction of coinciding images kept
  double tau_labels = 1.0;  // fraction of overlapping classes kept
};

namespace detail {
inline std::string feature_key(const std::vector<double>& f) {
  return std::string(reinterpret_cast<const char*>(f.data()), f.size() * sizeof(double));
}
}  // namespace detail

// Dials down how much of the victim's world leaks into the pool. Coincidence
// is exact feature equality against the victim train set. tau_labels drops
// whole overlapping classes (all their coinciding samples); tau_data then
// keeps a fraction of the surviving coinciding samples. Both cuts are seeded
// shuffle prefixes, so a smaller tau always keeps a subset of a larger one,
// and tau_data = tau_labels = 1 returns the pool unchanged. z ids and names
// are never renumbered.
inline SamplePool semi_open_filter(const SamplePool& pool, const Dataset& victim_train,
                                   const OverlapConfig& cfg, std::uint64_t seed) {
  if (cfg.tau_data < 0.0 || cfg.tau_data > 1.0 || cfg.tau_labels < 0.0 || cfg.tau_labels > 1.0)
    throw std::invalid_argument("semi_open_filter: tau values must lie in [0, 1]");

  std::unordered_set<std::string> train_keys;
  train_keys.reserve(victim_train.samples.size() * 2);
  for (const auto& s : victim_train.samples) train_keys.insert(detail::feature_key(s.features));

  std::vector<std::size_t> coinciding;
  std::vector<char> is_overlap_class(pool.n_z(), 0);
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    if (train_keys.count(detail::feature_key(pool.samples[i].features))) {
      coinciding.push_back(i);
      is_overlap_class[pool.samples[i].adversary_label] = 1;
    }
  }

  std::vector<std::uint32_t> overlap_classes;
  for (std::uint32_t z = 0; z < pool.n_z(); ++z)
    if (is_overlap_class[z]) overlap_classes.push_back(z);

  Rng class_rng(seed, "overlap/classes");
  std::vector<std::uint32_t> class_order = overlap_classes;
  class_rng.shuffle(class_order);
  auto kept_classes = static_cast<std::size_t>(
      std::llround(cfg.tau_labels * static_cast<double>(class_order.size())));
  std::vector<char> class_kept(pool.n_z(), 1);
  for (std::size_t i = kept_classes; i < class_order.size(); ++i) class_kept[class_order[i]] = 0;

  std::vector<std::size_t> surviving;
  for (std::size_t i : coinciding)
    if (class_kept[pool.samples[i].adversary_label]) surviving.push_back(i);

  Rng data_rng(seed, "overlap/data");
  std::vector<std::size_t> data_order = surviving;
  data_rng.shuffle(data_order);
  auto kept_data = static_cast<std::size_t>(
      std::llround(cfg.tau_data * static_cast<double>(data_order.size())));

  std::vector<char> drop(pool.samples.size(), 0);
  for (std::size_t i : coinciding) drop[i] = 1;  // default: out, unless it survives both cuts
  std::vector<std::size_t> final_kept(data_order.begin(), data_order.begin() + kept_data);
  for (std::size_t i : final_kept) drop[i] = 0;

  SamplePool out;
  out.d_in = pool.d_in;
  out.z_names = pool.z_names;
  out.samples.reserve(pool.samples.size());
  for (std::size_t i = 0; i < pool.samples.size(); ++i)
    if (!drop[i]) out.samples.push_back(pool.samples[i]);
  return out;
}

// --- on-disk format ----------------------------------------------------------
//
// KNDS v1, little-endian:
//   magic "KNDS" | u32 version | u32 d_in | u32 k | u32 z_count | u64 count |
//   u8 flags (bit0: records carry k target doubles) | z_count length-prefixed
//   names | records. Record: d_in f64 features, i32 victim_label, u32
//   adversary_label, then k f64 targets when flagged.

struct DatasetFile {
  std::size_t d_in = 0;
  std::size_t k = 0;
  std::vector<std::string> z_names;
  std::vector<LabeledSample> samples;
  std::vector<std::vector<double>> targets;  // empty unless the file carries them
};

inline void save_dataset_file(const DatasetFile& f, const std::string& path) {
  bool with_targets = !f.targets.empty();
  if (with_targets && f.targets.size() != f.samples.size())
    throw std::invalid_argument("save_dataset_file: targets/samples size mismatch");
  auto out = io::open_out(path);
  out.write("KNDS", 4);
  io::write_pod<std::uint32_t>(out, 1);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(f.d_in));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(f.k));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(f.z_names.size()));
  io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(f.samples.size()));
  io::write_pod<std::uint8_t>(out, with_targets ? 1 : 0);
  for (const auto& name : f.z_names) io::write_string(out, name);
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    const auto& s = f.samples[i];
    if (s.features.size() != f.d_in) throw std::invalid_argument("save_dataset_file: feature size mismatch");
    io::write_doubles(out, s.features);
    io::write_pod<std::int32_t>(out, s.victim_label);
    io::write_pod<std::uint32_t>(out, s.adversary_label);
    if (with_targets) {
      if (f.targets[i].size() != f.k) throw std::invalid_argument("save_dataset_file: target size mismatch");
      io::write_doubles(out, f.targets[i]);
    }
  }
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}

inline DatasetFile load_dataset_file(const std::string& path) {
  auto in = io::open_in(path);
  io::check_magic(in, "KNDS", path);
  auto version = io::read_pod<std::uint32_t>(in, path);
  if (version != 1) throw IoError(path + ": unsupported dataset format version " + std::to_string(version));
  DatasetFile f;
  f.d_in = io::read_pod<std::uint32_t>(in, path);
  f.k = io::read_pod<std::uint32_t>(in, path);
  auto z_count = io::read_pod<std::uint32_t>(in, path);
  auto count = io::read_pod<std::uint64_t>(in, path);
  auto flags = io::read_pod<std::uint8_t>(in, path);
  if (f.d_in == 0) throw IoError(path + ": zero feature dimension");
  f.z_names.reserve(z_count);
  for (std::uint32_t i = 0; i < z_count; ++i) f.z_names.push_back(io::read_string(in, path));
  bool with_targets = flags & 1;
  f.samples.resize(count);
  if (with_targets) f.targets.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto& s = f.samples[i];
    io::read_doubles(in, s.features, f.d_in, path);
    s.victim_label = io::read_pod<std::int32_t>(in, path);
    s.adversary_label = io::read_pod<std::uint32_t>(in, path);
    if (s.victim_label < -1 || (f.k > 0 && s.victim_label >= static_cast<int>(f.k)))
      throw IoError(path + ": victim label out of range");
    if (z_count > 0 && s.adversary_label >= z_count) throw IoError(path + ": adversary label out of range");
    if (with_targets) {
      io::read_doubles(in, f.targets[i], f.k, path);
      for (double v : f.targets[i])
        if (!std::isfinite(v) || v < 0.0) throw IoError(path + ": bad target value");
    }
  }
  return f;
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  DatasetFile f;
  f.d_in = d.d_in;
  f.k = d.k;
  f.z_names = d.class_names;
  f.samples = d.samples;
  save_dataset_file(f, path);
}

inline Dataset load_dataset(const std::string& path) {
  DatasetFile f = load_dataset_file(path);
  Dataset d;
  d.d_in = f.d_in;
  d.k = f.k;
  d.class_names = f.z_names;
  d.samples = std::move(f.samples);
  for (const auto& s : d.samples)
    if (s.victim_label < 0) throw IoError(path + ": dataset record without ground-truth label");
  return d;
}

inline void save_pool(const SamplePool& p, std::size_t k, const std::string& path) {
  DatasetFile f;
  f.d_in = p.d_in;
  f.k = k;
  f.z_names = p.z_names;
  f.samples = p.samples;
  save_dataset_file(f, path);
}

inline SamplePool load_pool(const std::string& path) {
  DatasetFile f = load_dataset_file(path);
  SamplePool p;
  p.d_in = f.d_in;
  p.z_names = std::move(f.z_names);
  p.samples = std::move(f.samples);
  if (p.z_names.empty()) throw IoError(path + ": pool without adversary labels");
  return p;
}

}  // namespace knockoff
