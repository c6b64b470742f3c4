#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace neuronml {

/// Raised when a config file is malformed, has unknown keys, or fails
/// validation.  The offending key is part of the message.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a checkpoint is missing, unreadable, or has an
/// unsupported version.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when training produces a non-finite loss or parameter.  Carries
/// whatever per-iteration history existed at the time so callers can
/// persist partial results before giving up.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::vector<double> loss_trace)
      : std::runtime_error(what), loss_trace_(std::move(loss_trace)) {}

  const std::vector<double>& loss_trace() const { return loss_trace_; }

 private:
  std::vector<double> loss_trace_;
};

}  // namespace neuronml
