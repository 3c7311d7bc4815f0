#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "knockoff/loss.hpp"
#include "knockoff/mlp.hpp"

namespace knockoff {

// SGD with classic momentum:
//   v <- momentum * v + g
//   theta <- theta - lr * v
struct OptimizerState {
  double momentum = 0.0;
  std::vector<DenseMatrix> velocity_w;
  std::vector<std::vector<double>> velocity_b;

  static OptimizerState for_model(const MlpModel& m, double momentum_coeff) {
    if (momentum_coeff < 0.0 || momentum_coeff >= 1.0)
      throw std::invalid_argument("OptimizerState: momentum must be in [0, 1)");
    OptimizerState s;
    s.momentum = momentum_coeff;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
      s.velocity_w.emplace_back(m.weights[l].rows, m.weights[l].cols);
      s.velocity_b.emplace_back(m.biases[l].size(), 0.0);
    }
    return s;
  }
};

inline void sgd_step(MlpModel& m, const Gradients& g, OptimizerState& s, double lr) {
  if (lr <= 0.0 || !std::isfinite(lr)) throw std::invalid_argument("sgd_step: lr must be positive and finite");
  if (g.weights.size() != m.n_layers() || s.velocity_w.size() != m.n_layers())
    throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    auto& vw = s.velocity_w[l];
    if (!vw.same_shape(m.weights[l]) || !g.weights[l].same_shape(m.weights[l]))
      throw std::invalid_argument("sgd_step: layer shape mismatch");
    for (std::size_t i = 0; i < vw.data.size(); ++i) {
      vw.data[i] = s.momentum * vw.data[i] + g.weights[l].data[i];
      m.weights[l].data[i] -= lr * vw.data[i];
    }
    auto& vb = s.velocity_b[l];
    for (std::size_t i = 0; i < vb.size(); ++i) {
      vb[i] = s.momentum * vb[i] + g.biases[l][i];
      m.biases[l][i] -= lr * vb[i];
    }
  }
}

// Step decay: base_lr * factor^floor(epoch / every).
inline double lr_at_epoch(double base_lr, double decay_factor, std::size_t decay_every, std::size_t epoch) {
  if (decay_every == 0) throw std::invalid_argument("lr_at_epoch: decay interval must be positive");
  if (base_lr <= 0.0) throw std::invalid_argument("lr_at_epoch: base_lr must be positive");
  return base_lr * std::pow(decay_factor, static_cast<double>(epoch / decay_every));
}

}  // namespace knockoff
