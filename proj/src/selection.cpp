#include "neuronml/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neuronml {

double log_evidence(double log_likelihood, std::size_t free_params, double n_samples) {
  if (!(n_samples >= 1.0))
    throw std::invalid_argument("log_evidence: need at least one sample");
  return log_likelihood - 0.5 * double(free_params) * std::log(n_samples);
}

std::vector<double> model_posterior(const std::vector<double>& evidences) {
  if (evidences.empty())
    throw std::invalid_argument("model_posterior: empty evidence list");
  const double top = *std::max_element(evidences.begin(), evidences.end());
  std::vector<double> post(evidences.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < evidences.size(); ++i) {
    post[i] = std::exp(evidences[i] - top);
    sum += post[i];
  }
  for (double& p : post) p /= sum;
  return post;
}

SelectionResult select_model(const std::vector<CandidateModel>& candidates,
                             double n_samples) {
  if (candidates.size() < 2)
    throw std::invalid_argument("select_model: need at least two candidates");
  SelectionResult r;
  r.evidence.reserve(candidates.size());
  for (const CandidateModel& c : candidates)
    r.evidence.push_back(log_evidence(c.log_likelihood, c.free_params, n_samples));
  r.posterior = model_posterior(r.evidence);
  r.best_index = std::size_t(std::max_element(r.evidence.begin(), r.evidence.end()) -
                             r.evidence.begin());
  return r;
}

}  // namespace neuronml
