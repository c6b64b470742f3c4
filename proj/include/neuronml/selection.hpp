#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace neuronml {

/// A fitted candidate: its maximized log-likelihood and how many free
/// parameters it spent to get it.
struct CandidateModel {
  std::string label;
  double log_likelihood = 0.0;
  std::size_t free_params = 0;
};

/// Penalized evidence: log_likelihood - (free_params / 2) * ln(n_samples).
/// Requires n_samples >= 1.
double log_evidence(double log_likelihood, std::size_t free_params, double n_samples);

/// Softmax over evidences (max-subtracted).  Sums to one; invariant under
/// shifting every evidence by a constant.
std::vector<double> model_posterior(const std::vector<double>& evidences);

struct SelectionResult {
  std::vector<double> evidence;
  std::vector<double> posterior;
  std::size_t best_index = 0;
};

/// Evidence + posterior for a candidate set on n_samples points; best_index
/// marks the argmax evidence.  Requires at least two candidates.
SelectionResult select_model(const std::vector<CandidateModel>& candidates,
                             double n_samples);

}  // namespace neuronml
