#pragma once

#include <algorithm>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "knockoff/loss.hpp"

namespace knockoff {

enum class RewardSignal { cert, div, loss, uncert };

inline RewardSignal parse_reward_signal(const std::string& s) {
  if (s == "cert") return RewardSignal::cert;
  if (s == "div") return RewardSignal::div;
  if (s == "loss") return RewardSignal::loss;
  if (s == "uncert") return RewardSignal::uncert;
  throw std::invalid_argument("unknown reward signal '" + s + "'");
}

inline std::string format_reward_signal(RewardSignal s) {
  switch (s) {
    case RewardSignal::cert: return "cert";
    case RewardSignal::div: return "div";
    case RewardSignal::loss: return "loss";
    case RewardSignal::uncert: return "uncert";
  }
  throw std::invalid_argument("bad reward signal");
}

// Comma-separated list, e.g. "cert,div,loss".
inline std::vector<RewardSignal> parse_reward_signals(const std::string& text) {
  std::vector<RewardSignal> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto end = comma == std::string::npos ? text.size() : comma;
    out.push_back(parse_reward_signal(text.substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty reward signal list");
  return out;
}

struct RewardConfig {
  std::vector<RewardSignal> signals = {RewardSignal::cert};
  std::size_t window = 10;  // baseline averaging span and diversity lag
};

// Margin between the two largest entries. Needs at least two classes.
inline double reward_cert(std::span<const double> posterior) {
  if (posterior.size() < 2) throw std::invalid_argument("reward_cert: need at least 2 entries");
  double top1 = -1e300, top2 = -1e300;
  for (double v : posterior) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return top1 - top2;
}

inline double reward_uncert(std::span<const double> posterior) { return 1.0 - reward_cert(posterior); }

// How badly the knockoff still disagrees with the victim on this sample.
inline double reward_loss(std::span<const double> victim_out, std::span<const double> knockoff_out) {
  return soft_ce_loss(victim_out, knockoff_out);
}

// Per-step bookkeeping: running min/max rescalers, the baseline window, and
// the running mean posterior with its lagged snapshots for the diversity
// signal.
class RewardState {
 public:
  RewardState(RewardConfig cfg, std::size_t k) : cfg_(std::move(cfg)), k_(k) {
    if (cfg_.signals.empty()) throw std::invalid_argument("RewardState: no reward signals enabled");
    if (cfg_.window == 0) throw std::invalid_argument("RewardState: window must be at least 1");
    if (k_ < 2) throw std::invalid_argument("RewardState: need at least 2 classes");
    bounds_.resize(cfg_.signals.size());
    mean_posterior_.assign(k_, 0.0);
  }

  struct StepReward {
    double r = 0.0;
    double baseline = 0.0;
    std::vector<double> raw;
    std::vector<double> rescaled;
  };

  // Consumes one policy step's worth of victim outputs (and the knockoff's
  // matching outputs when the loss signal is enabled). Returns the aggregated
  // reward and the pre-step baseline.
  StepReward observe_step(const std::vector<std::vector<double>>& victim_outputs,
                          const std::vector<std::vector<double>>& knockoff_outputs) {
    if (victim_outputs.empty()) throw std::invalid_argument("observe_step: empty batch");
    bool need_loss = enabled(RewardSignal::loss);
    if (need_loss && knockoff_outputs.size() != victim_outputs.size())
      throw std::invalid_argument("observe_step: knockoff outputs required for the loss signal");
    for (const auto& y : victim_outputs)
      if (y.size() != k_) throw std::invalid_argument("observe_step: output size mismatch");

    // advance the running mean, keeping the lagged snapshot window
    std::vector<double> batch_mean(k_, 0.0);
    for (const auto& y : victim_outputs)
      for (std::size_t i = 0; i < k_; ++i) batch_mean[i] += y[i];
    for (double& v : batch_mean) v /= static_cast<double>(victim_outputs.size());
    n_steps_ += 1;
    for (std::size_t i = 0; i < k_; ++i)
      mean_posterior_[i] += (batch_mean[i] - mean_posterior_[i]) / static_cast<double>(n_steps_);
    mean_history_.push_back(mean_posterior_);
    if (mean_history_.size() > cfg_.window + 1) mean_history_.pop_front();

    StepReward out;
    out.raw.reserve(cfg_.signals.size());
    for (RewardSignal s : cfg_.signals) {
      double v = 0.0;
      switch (s) {
        case RewardSignal::cert: {
          for (const auto& y : victim_outputs) v += reward_cert(y);
          v /= static_cast<double>(victim_outputs.size());
          break;
        }
        case RewardSignal::uncert: {
          for (const auto& y : victim_outputs) v += reward_uncert(y);
          v /= static_cast<double>(victim_outputs.size());
          break;
        }
        case RewardSignal::div: {
          // growth of the mean posterior against its value `window` steps ago;
          // until enough history exists the lagged snapshot is the current one
          const auto& lagged = n_steps_ > cfg_.window ? mean_history_.front() : mean_posterior_;
          for (std::size_t i = 0; i < k_; ++i) v += std::max(0.0, mean_posterior_[i] - lagged[i]);
          break;
        }
        case RewardSignal::loss: {
          for (std::size_t i = 0; i < victim_outputs.size(); ++i)
            v += reward_loss(victim_outputs[i], knockoff_outputs[i]);
          v /= static_cast<double>(victim_outputs.size());
          break;
        }
      }
      out.raw.push_back(v);
    }

    out.rescaled.reserve(out.raw.size());
    for (std::size_t i = 0; i < out.raw.size(); ++i) {
      out.rescaled.push_back(rescale(bounds_[i], out.raw[i]));
      out.r += out.rescaled.back();
    }

    out.baseline = 0.0;
    for (double v : recent_) out.baseline += v;
    if (!recent_.empty()) out.baseline /= static_cast<double>(recent_.size());

    recent_.push_back(out.r);
    if (recent_.size() > cfg_.window) recent_.pop_front();
    return out;
  }

  const RewardConfig& config() const { return cfg_; }
  const std::vector<double>& mean_posterior() const { return mean_posterior_; }
  std::size_t steps() const { return n_steps_; }

 private:
  struct Bounds {
    bool seen = false;
    double lo = 0.0;
    double hi = 0.0;
  };

  bool enabled(RewardSignal s) const {
    return std::find(cfg_.signals.begin(), cfg_.signals.end(), s) != cfg_.signals.end();
  }

  // Running min/max squash to [0, 1]. The first observation (and any flat
  // stretch) sits at 0.5.
  static double rescale(Bounds& b, double v) {
    if (!b.seen) {
      b.seen = true;
      b.lo = b.hi = v;
      return 0.5;
    }
    b.lo = std::min(b.lo, v);
    b.hi = std::max(b.hi, v);
    if (b.hi == b.lo) return 0.5;
    return (v - b.lo) / (b.hi - b.lo);
  }

  RewardConfig cfg_;
  std::size_t k_;
  std::vector<Bounds> bounds_;
  std::deque<double> recent_;
  std::vector<double> mean_posterior_;
  std::size_t n_steps_ = 0;
  std::deque<std::vector<double>> mean_history_;
};

}  // namespace knockoff
