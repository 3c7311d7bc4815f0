#pragma once

#include <span>
#include <vector>

#include "knockoff/defense.hpp"
#include "knockoff/mlp.hpp"

namespace knockoff {

// The only interface the adversary gets: feature vector in, defended
// posterior out, every call metered. The model itself never leaves this
// object.
class VictimBlackbox {
 public:
  VictimBlackbox(MlpModel model, DefensePolicy defense)
      : model_(std::move(model)), defense_(defense) {}

  std::vector<double> query_one(std::span<const double> x) {
    ++count_;
    return truncate(forward(model_, x), defense_);
  }

  std::vector<std::vector<double>> query(const std::vector<std::vector<double>>& xs) {
    std::vector<std::vector<double>> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(query_one(x));
    return out;
  }

  std::size_t query_count() const { return count_; }
  std::size_t input_dim() const { return model_.input_dim(); }
  std::size_t output_dim() const { return model_.output_dim(); }
  const DefensePolicy& defense() const { return defense_; }

 private:
  MlpModel model_;
  DefensePolicy defense_;
  std::size_t count_ = 0;
};

}  // namespace knockoff
