#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace neuronml {

/// One training-iteration row.  The CSV column order is fixed and documented
/// in the README; wall_ms is kept in memory and reported in run summaries
/// but deliberately left out of the CSV so that re-running a seed produces a
/// byte-identical metrics file.
struct MetricsRecord {
  std::uint64_t iteration = 0;
  double weight_loss = 0.0;      // mean post-adaptation query loss across the batch
  double query_metric = 0.0;     // mean query MSE (regression) or accuracy (classification)
  double l1_norm = 0.0;          // ||mask .* params||_1 of the shared state after the update
  double frugality_bound = 0.0;  // sparsity budget for this iteration's task size
  double hinge_violation = 0.0;  // max(0, l1_norm - frugality_bound)
  double soft_plasticity = 0.0;  // batch mean of the soft overlap term
  double hard_overlap = 0.0;     // batch mean of the thresholded overlap term
  double sensitivity_loss = 0.0; // batch mean of the sensitivity term
  double mask_density = 0.0;     // mean mask probability after the update
  double wall_ms = 0.0;          // not serialized to CSV
};

/// Header + one row per record, doubles printed with round-trip precision.
std::string metrics_to_csv(const std::vector<MetricsRecord>& records);

/// Names for the serialized columns, in order.
const std::vector<std::string>& metrics_columns();

}  // namespace neuronml
