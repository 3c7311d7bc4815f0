#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace knockoff {

// Optimization diverged (non-finite loss). Carries the epoch for diagnostics.
struct TrainingFailure : std::runtime_error {
  std::size_t epoch;
  TrainingFailure(std::size_t at_epoch, const std::string& what)
      : std::runtime_error("training failure at epoch " + std::to_string(at_epoch) + ": " + what),
        epoch(at_epoch) {}
};

// Requested more unqueried samples than the pool holds.
struct PoolExhausted : std::runtime_error {
  explicit PoolExhausted(const std::string& what) : std::runtime_error(what) {}
};

// File could not be read/written/parsed. Message always names the path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Bad key, bad value, or missing required field in an experiment config.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace knockoff
