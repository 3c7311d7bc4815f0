#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "knockoff/dataset.hpp"
#include "knockoff/rng.hpp"
#include "knockoff/training.hpp"

namespace knockoff {

// Inverse-frequency weights n_min / n_k, so the rarest class weighs 1 and
// everything else less. Every class must appear at least once.
inline std::vector<double> class_weights(const std::vector<int>& labels, std::size_t k) {
  if (k == 0) throw std::invalid_argument("class_weights: k must be positive");
  std::vector<std::size_t> counts(k, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw std::invalid_argument("class_weights: label out of range");
    counts[y]++;
  }
  std::size_t n_min = SIZE_MAX;
  for (std::size_t c : counts) n_min = std::min(n_min, c);
  if (n_min == 0) throw std::invalid_argument("class_weights: class with no samples");
  std::vector<double> w(k);
  for (std::size_t c = 0; c < k; ++c) w[c] = static_cast<double>(n_min) / static_cast<double>(counts[c]);
  return w;
}

struct VictimConfig {
  std::vector<std::size_t> hidden = {64};
  TrainConfig train;        // defaults: lr 0.1, x0.1 every 60 epochs, momentum 0.5
  bool weighted_loss = true;
};

// Supervised training on ground truth (one-hot targets). With zero epochs the
// returned model is just the random init.
inline MlpModel train_victim(const Dataset& data, const VictimConfig& cfg, Rng& rng) {
  if (data.samples.empty()) throw std::invalid_argument("train_victim: empty dataset");
  std::vector<std::size_t> dims;
  dims.push_back(data.d_in);
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(data.k);
  MlpModel m = make_mlp(dims);
  glorot_init(m, rng);
  if (cfg.train.epochs == 0) return m;

  std::vector<std::vector<double>> xs, ts;
  std::vector<int> labels;
  xs.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    if (s.victim_label < 0 || static_cast<std::size_t>(s.victim_label) >= data.k)
      throw std::invalid_argument("train_victim: sample without valid ground truth");
    xs.push_back(s.features);
    std::vector<double> t(data.k, 0.0);
    t[s.victim_label] = 1.0;
    ts.push_back(std::move(t));
    labels.push_back(s.victim_label);
  }

  std::vector<double> sample_weights;
  if (cfg.weighted_loss) {
    auto per_class = class_weights(labels, data.k);
    sample_weights.reserve(labels.size());
    for (int y : labels) sample_weights.push_back(per_class[y]);
  }
  train_model(m, xs, ts, cfg.weighted_loss ? &sample_weights : nullptr, cfg.train, rng);
  return m;
}

}  // namespace knockoff
