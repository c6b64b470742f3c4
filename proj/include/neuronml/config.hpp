#pragma once

#include <cstdint>
#include <string>

#include "neuronml/meta.hpp"

namespace neuronml {

/// TrainConfig plus the run-level knobs: where artifacts go, what the
/// metrics file is called, how often to checkpoint, and which structure
/// terms an ablation has switched off.
struct RunConfig {
  TrainConfig train;
  std::string output_dir = "run";
  std::string metrics_filename = "metrics.csv";
  std::uint64_t checkpoint_cadence = 1000;  // iterations between checkpoints, >= 1
  bool disable_frugality = false;
  bool disable_plasticity = false;
  bool disable_sensitivity = false;

  void validate() const;

  /// The train config with ablation switches folded in (disabled terms get
  /// weight zero).
  TrainConfig effective_train() const;
};

/// Parse a flat JSON object.  Unknown keys, wrong types, and out-of-range
/// values all raise ConfigError naming the key.
RunConfig parse_run_config(const std::string& json_text);

/// Read + parse a config file.
RunConfig load_run_config(const std::string& path);

/// Serialize back to the same flat key set (the "config echo" embedded in
/// checkpoints and summaries).  parse_run_config(echo_config(c)) == c.
std::string echo_config(const RunConfig& cfg);

}  // namespace neuronml
