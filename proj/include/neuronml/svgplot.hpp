#pragma once

#include <string>
#include <vector>

#include "neuronml/metrics.hpp"

namespace neuronml {

/// Standalone SVG line chart of the training loss (left axis, log scale
/// when positive) and mask density (right axis, [0,1]) over iterations.
std::string render_metrics_svg(const std::vector<MetricsRecord>& records,
                               const std::string& title);

}  // namespace neuronml
