#pragma once

#include <string>

#include "neuronml/config.hpp"
#include "neuronml/meta.hpp"

namespace neuronml {

/// Versioned JSON snapshot of the shared state: architecture, weights,
/// mask logits, Hebbian tracker, config echo, iteration counter.  Doubles
/// round-trip exactly.  Writes are atomic.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const MetaState& state,
                     const RunConfig& cfg);

struct LoadedCheckpoint {
  MetaState state;
  RunConfig config;
};

/// Throws CheckpointError on missing files, malformed JSON, or version
/// mismatches.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace neuronml
