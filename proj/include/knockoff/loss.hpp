#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "knockoff/matrix.hpp"
#include "knockoff/mlp.hpp"

namespace knockoff {

// Floor applied to predicted probabilities inside the log. Targets are used
// as-is: truncated blackbox outputs arrive unnormalized and act as weights.
inline constexpr double kLogClamp = 1e-12;

// L(t, p) = -sum_k t_k log p_k. For a normalized target this is KL(t || p)
// plus the entropy of t; an all-zero target gives exactly zero.
inline double soft_ce_loss(std::span<const double> target, std::span<const double> predicted) {
  if (target.size() != predicted.size()) throw std::invalid_argument("soft_ce_loss: length mismatch");
  if (target.empty()) throw std::invalid_argument("soft_ce_loss: empty vectors");
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] == 0.0) continue;
    double p = predicted[k] < kLogClamp ? kLogClamp : predicted[k];
    loss -= target[k] * std::log(p);
  }
  return loss;
}

// Same shapes as the model; accumulated across a batch, then averaged.
struct Gradients {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;

  static Gradients zeros_like(const MlpModel& m) {
    Gradients g;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
      g.weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
      g.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    return g;
  }

  void scale(double s) {
    for (auto& w : weights)
      for (double& v : w.data) v *= s;
    for (auto& b : biases)
      for (double& v : b) v *= s;
  }
};

// Backprop of soft_ce_loss(target, softmax(logits)) through the net.
// At the logits: dL/da_j = p_j * (sum_k t_k) - t_j, which also covers
// unnormalized targets. Adds scale * gradient into `grads`; returns the loss.
inline double accumulate_gradients(const MlpModel& m, std::span<const double> x,
                                   std::span<const double> target, Gradients& grads,
                                   double scale = 1.0) {
  if (target.size() != m.output_dim()) throw std::invalid_argument("accumulate_gradients: target size mismatch");
  ForwardTrace t = forward_trace(m, x);
  double loss = soft_ce_loss(target, t.posterior);

  double target_mass = 0.0;
  for (double v : target) target_mass += v;

  std::vector<double> delta(m.output_dim());
  for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = t.posterior[j] * target_mass - target[j];

  for (std::size_t l = m.n_layers(); l-- > 0;) {
    const std::vector<double>& input = t.post_act[l];
    add_outer(grads.weights[l], delta, input, scale);
    for (std::size_t i = 0; i < delta.size(); ++i) grads.biases[l][i] += scale * delta[i];
    if (l == 0) break;
    std::vector<double> prev;
    matvec_transposed(m.weights[l], delta, prev);
    // relu pass-through mask; post_act[l] is the activated output of layer l-1
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (t.post_act[l][i] <= 0.0) prev[i] = 0.0;
    delta = std::move(prev);
  }
  return loss * scale;
}

}  // namespace knockoff
