#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "knockoff/errors.hpp"
#include "knockoff/loss.hpp"
#include "knockoff/mlp.hpp"
#include "knockoff/optimizer.hpp"
#include "knockoff/rng.hpp"

namespace knockoff {

struct TrainConfig {
  std::size_t epochs = 100;
  double base_lr = 0.1;
  double lr_decay_factor = 0.1;
  std::size_t lr_decay_every = 60;
  double momentum = 0.5;
  std::size_t batch_size = 32;
};

// One SGD step on the samples named by `idx`. `weights` (optional) scales each
// sample's loss and gradient. Returns the mean weighted batch loss.
inline double sgd_minibatch_step(MlpModel& m, std::span<const std::size_t> idx,
                                 const std::vector<std::vector<double>>& inputs,
                                 const std::vector<std::vector<double>>& targets,
                                 const std::vector<double>* weights, OptimizerState& opt, double lr) {
  if (idx.empty()) throw std::invalid_argument("sgd_minibatch_step: empty batch");
  Gradients g = Gradients::zeros_like(m);
  double loss = 0.0;
  double inv_n = 1.0 / static_cast<double>(idx.size());
  for (std::size_t i : idx) {
    double w = weights ? (*weights)[i] : 1.0;
    loss += accumulate_gradients(m, inputs[i], targets[i], g, w * inv_n);
  }
  sgd_step(m, g, opt, lr);
  return loss;
}

// Mini-batch SGD over the whole set: seeded reshuffle each epoch, sequential
// batches, step-decayed learning rate. Throws TrainingFailure if an epoch's
// mean loss goes non-finite. Returns the final epoch's mean loss (0 if no
// epochs ran). The caller initializes the model.
inline double train_model(MlpModel& m, const std::vector<std::vector<double>>& inputs,
                          const std::vector<std::vector<double>>& targets,
                          const std::vector<double>* sample_weights, const TrainConfig& cfg, Rng& rng) {
  if (inputs.size() != targets.size()) throw std::invalid_argument("train_model: inputs/targets size mismatch");
  if (sample_weights && sample_weights->size() != inputs.size())
    throw std::invalid_argument("train_model: weights size mismatch");
  if (cfg.batch_size == 0) throw std::invalid_argument("train_model: batch_size must be positive");
  if (cfg.epochs == 0) return 0.0;
  if (inputs.empty()) throw std::invalid_argument("train_model: empty training set");

  OptimizerState opt = OptimizerState::for_model(m, cfg.momentum);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = lr_at_epoch(cfg.base_lr, cfg.lr_decay_factor, cfg.lr_decay_every, epoch);
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      total += sgd_minibatch_step(m, idx, inputs, targets, sample_weights, opt, lr);
      ++batches;
    }
    epoch_loss = total / static_cast<double>(batches);
    if (!std::isfinite(epoch_loss)) throw TrainingFailure(epoch, "mean epoch loss is not finite");
  }
  return epoch_loss;
}

}  // namespace knockoff
