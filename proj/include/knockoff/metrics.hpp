#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "knockoff/dataset.hpp"
#include "knockoff/mlp.hpp"

namespace knockoff {

struct PerClassStats {
  std::vector<std::size_t> correct;
  std::vector<std::size_t> total;

  double accuracy(std::size_t cls) const {
    return total[cls] == 0 ? 0.0 : static_cast<double>(correct[cls]) / static_cast<double>(total[cls]);
  }
};

inline PerClassStats per_class_stats(const MlpModel& m, const Dataset& data) {
  if (data.samples.empty()) throw std::invalid_argument("per_class_stats: empty dataset");
  PerClassStats s;
  s.correct.assign(data.k, 0);
  s.total.assign(data.k, 0);
  for (const auto& sample : data.samples) {
    if (sample.victim_label < 0 || static_cast<std::size_t>(sample.victim_label) >= data.k)
      throw std::invalid_argument("per_class_stats: bad ground-truth label");
    int pred = argmax_index(forward(m, sample.features));
    s.total[sample.victim_label]++;
    if (pred == sample.victim_label) s.correct[sample.victim_label]++;
  }
  return s;
}

inline double top1_accuracy(const MlpModel& m, const Dataset& data) {
  auto s = per_class_stats(m, data);
  std::size_t correct = 0, total = 0;
  for (std::size_t c = 0; c < data.k; ++c) {
    correct += s.correct[c];
    total += s.total[c];
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace knockoff
