#include "neuronml/metrics.hpp"

#include <cinttypes>
#include <cstdio>

namespace neuronml {

namespace {

// Shortest representation that round-trips a double exactly.
void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Trim to fewer digits when they already round-trip; keeps files readable.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    double back;
    std::sscanf(probe, "%lf", &back);
    if (back == v) {
      out += probe;
      return;
    }
  }
  out += buf;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "iteration",      "weight_loss",     "query_metric",   "l1_norm",
      "frugality_bound", "hinge_violation", "soft_plasticity", "hard_overlap",
      "sensitivity_loss", "mask_density"};
  return cols;
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
  std::string out;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  out += '\n';
  char ibuf[32];
  for (const MetricsRecord& r : records) {
    std::snprintf(ibuf, sizeof ibuf, "%" PRIu64, r.iteration);
    out += ibuf;
    for (double v : {r.weight_loss, r.query_metric, r.l1_norm, r.frugality_bound,
                     r.hinge_violation, r.soft_plasticity, r.hard_overlap,
                     r.sensitivity_loss, r.mask_density}) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace neuronml
