#include "neuronml/structure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace neuronml {

namespace {

void check_probs(std::span<const double> probs, const char* what) {
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::domain_error(std::string(what) + ": probability outside [0, 1]");
}

// Visit every (mask entry, |param value|) pair under the ownership rule:
// per-unit, a hidden unit owns its incoming weight row and its bias;
// per-parameter, each entry owns the one parameter it indexes.
template <typename F>
void for_owned_params(const Network& net, MaskGranularity g, F&& visit) {
  if (g == MaskGranularity::kPerParameter) {
    std::size_t idx = 0;
    for (const Layer& l : net.layers) {
      for (double w : l.weights) visit(idx++, w);
      for (double b : l.biases) visit(idx++, b);
    }
    return;
  }
  std::size_t unit = 0;
  for (std::size_t li = 0; li + 1 < net.layers.size(); ++li) {
    const Layer& l = net.layers[li];
    for (std::size_t u = 0; u < l.out; ++u, ++unit) {
      const double* w = l.weights.data() + u * l.in;
      for (std::size_t k = 0; k < l.in; ++k) visit(unit, w[k]);
      visit(unit, l.biases[u]);
    }
  }
}

}  // namespace

std::vector<std::uint8_t> activation_set(std::span<const double> probs, double threshold) {
  check_probs(probs, "activation_set");
  std::vector<std::uint8_t> on(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) on[i] = probs[i] > threshold ? 1 : 0;
  return on;
}

HebbianTracker HebbianTracker::make(std::size_t n, double decay, double temperature) {
  if (!(decay > 0.0 && decay <= 1.0))
    throw std::invalid_argument("tracker decay must be in (0, 1]");
  if (!(temperature > 0.0))
    throw std::invalid_argument("tracker temperature must be positive");
  HebbianTracker t;
  t.importance.assign(n, 0.0);
  t.decay = decay;
  t.temperature = temperature;
  return t;
}

std::vector<double> hebbian_probs(const HebbianTracker& tracker) {
  if (tracker.importance.empty())
    throw std::invalid_argument("hebbian_probs: empty tracker");
  const double tmax = *std::max_element(tracker.importance.begin(),
                                        tracker.importance.end());
  std::vector<double> p(tracker.importance.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(tracker.temperature * (tracker.importance[i] - tmax));
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

void update_tracker(HebbianTracker& tracker, std::span<const std::uint8_t> activated,
                    std::span<const double> impacts) {
  if (activated.size() != tracker.importance.size() ||
      impacts.size() != tracker.importance.size())
    throw std::invalid_argument("update_tracker: size mismatch");
  const double keep = 1.0 - tracker.decay;
  for (std::size_t i = 0; i < tracker.importance.size(); ++i) {
    if (activated[i])
      tracker.importance[i] = keep * tracker.importance[i] + tracker.decay * impacts[i];
    else
      tracker.importance[i] = keep * tracker.importance[i];
  }
}

double frugality_bound(double d, double n_samples, double c, double scale) {
  if (!(d > 0.0) || !(n_samples > 0.0))
    throw std::invalid_argument("frugality_bound: d and n_samples must be positive");
  return std::max(c, scale * d * std::log(n_samples / d));
}

FrugalityResult frugality_loss(const Network& net, std::span<const double> probs,
                               MaskGranularity g, double bound, double hinge_weight) {
  if (probs.size() != net.mask_size(g))
    throw std::invalid_argument("frugality_loss: mask size does not match network");
  check_probs(probs, "frugality_loss");
  FrugalityResult r;
  for_owned_params(net, g, [&](std::size_t idx, double w) {
    r.l1 += probs[idx] * std::abs(w);
  });
  r.penalty = hinge_weight * std::max(0.0, r.l1 - bound);
  return r;
}

std::vector<double> frugality_prob_grads(const Network& net, std::span<const double> probs,
                                         MaskGranularity g, double bound,
                                         double hinge_weight) {
  const FrugalityResult r = frugality_loss(net, probs, g, bound, hinge_weight);
  const double slope = 1.0 + (r.l1 > bound ? hinge_weight : 0.0);
  std::vector<double> grads(probs.size(), 0.0);
  for_owned_params(net, g, [&](std::size_t idx, double w) {
    grads[idx] += slope * std::abs(w);
  });
  return grads;
}

PlasticityResult plasticity_loss(std::span<const double> probs_i,
                                 const std::vector<std::vector<double>>& probs_others,
                                 std::span<const double> hebbian_p, double threshold) {
  check_probs(probs_i, "plasticity_loss");
  if (hebbian_p.size() != probs_i.size())
    throw std::invalid_argument("plasticity_loss: importance size mismatch");
  PlasticityResult r;
  const std::vector<std::uint8_t> on_i = activation_set(probs_i, threshold);
  for (const auto& other : probs_others) {
    if (other.size() != probs_i.size())
      throw std::invalid_argument("plasticity_loss: mask size mismatch");
    check_probs(other, "plasticity_loss");
    for (std::size_t u = 0; u < probs_i.size(); ++u) {
      r.soft += probs_i[u] * other[u] * hebbian_p[u];
      if (on_i[u] && other[u] > threshold) r.hard += hebbian_p[u];
    }
  }
  return r;
}

std::vector<double> plasticity_prob_grads(std::span<const double> probs_i,
                                          const std::vector<std::vector<double>>& probs_others,
                                          std::span<const double> hebbian_p) {
  std::vector<double> grads(probs_i.size(), 0.0);
  for (const auto& other : probs_others) {
    if (other.size() != probs_i.size())
      throw std::invalid_argument("plasticity_prob_grads: mask size mismatch");
    for (std::size_t u = 0; u < probs_i.size(); ++u)
      grads[u] += other[u] * hebbian_p[u];
  }
  return grads;
}

std::vector<double> sensitivity_scores(const Network& net, std::span<const double> mask_logits,
                                       const Tensor& inputs, const Tensor& targets,
                                       LossKind kind, MaskGranularity g) {
  const LossGrads lg = loss_and_grads(net, mask_logits, inputs, targets, kind, g);
  std::vector<double> scores(net.mask_size(g), 0.0);
  if (g == MaskGranularity::kPerParameter) {
    std::size_t idx = 0;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      for (double gw : lg.grads.weight_grads[li]) scores[idx++] = std::abs(gw);
      for (double gb : lg.grads.bias_grads[li]) scores[idx++] = std::abs(gb);
    }
    return scores;
  }
  std::size_t unit = 0;
  for (std::size_t li = 0; li + 1 < net.layers.size(); ++li) {
    const Layer& l = net.layers[li];
    for (std::size_t u = 0; u < l.out; ++u, ++unit) {
      double s = 0.0;
      const double* gw = lg.grads.weight_grads[li].data() + u * l.in;
      for (std::size_t k = 0; k < l.in; ++k) s += std::abs(gw[k]);
      s += std::abs(lg.grads.bias_grads[li][u]);
      scores[unit] = s;
    }
  }
  return scores;
}

double sensitivity_loss(std::span<const double> probs, std::span<const double> scores,
                        double floor) {
  if (probs.size() != scores.size())
    throw std::invalid_argument("sensitivity_loss: size mismatch");
  check_probs(probs, "sensitivity_loss");
  double total = 0.0;
  for (double s : scores) {
    if (s < 0.0) throw std::domain_error("sensitivity_loss: negative score");
    total += s + floor;
  }
  if (!(total > 0.0))
    throw std::domain_error("sensitivity_loss: all scores zero with zero floor");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    loss += -std::log((scores[i] + floor) / total) * probs[i];
  return loss;
}

std::vector<double> sensitivity_prob_grads(std::span<const double> scores, double floor) {
  double total = 0.0;
  for (double s : scores) total += s + floor;
  if (!(total > 0.0))
    throw std::domain_error("sensitivity_prob_grads: all scores zero with zero floor");
  std::vector<double> grads(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    grads[i] = -std::log((scores[i] + floor) / total);
  return grads;
}

StructureLossParts structure_loss(const Network& net, std::span<const double> probs_i,
                                  const std::vector<std::vector<double>>& probs_others,
                                  const HebbianTracker& tracker,
                                  std::span<const double> scores, const StructureWeights& sw,
                                  double d, double n_samples, double threshold,
                                  MaskGranularity g) {
  StructureLossParts parts;
  parts.bound = frugality_bound(d, n_samples, sw.budget_const, sw.budget_scale);
  const FrugalityResult fr =
      frugality_loss(net, probs_i, g, parts.bound, sw.hinge_weight);
  parts.l1 = fr.l1;
  parts.hinge = fr.penalty;

  const std::vector<double> p = hebbian_probs(tracker);
  const PlasticityResult pl = plasticity_loss(probs_i, probs_others, p, threshold);
  parts.soft_plasticity = pl.soft;
  parts.hard_overlap = pl.hard;

  parts.sensitivity = sensitivity_loss(probs_i, scores, sw.sensitivity_floor);

  parts.total = sw.frugality_weight * (parts.l1 + parts.hinge) +
                sw.plasticity_weight * parts.soft_plasticity +
                sw.sensitivity_weight * parts.sensitivity;
  return parts;
}

std::vector<double> structure_logit_grads(const Network& net, std::span<const double> logits_i,
                                          const std::vector<std::vector<double>>& probs_others,
                                          const HebbianTracker& tracker,
                                          std::span<const double> scores,
                                          const StructureWeights& sw, double d,
                                          double n_samples, MaskGranularity g) {
  const std::vector<double> probs = sigmoid(logits_i);
  const double bound = frugality_bound(d, n_samples, sw.budget_const, sw.budget_scale);

  const std::vector<double> g_fr =
      frugality_prob_grads(net, probs, g, bound, sw.hinge_weight);
  const std::vector<double> p = hebbian_probs(tracker);
  const std::vector<double> g_pl = plasticity_prob_grads(probs, probs_others, p);
  const std::vector<double> g_se = sensitivity_prob_grads(scores, sw.sensitivity_floor);

  std::vector<double> grads(probs.size());
  for (std::size_t u = 0; u < probs.size(); ++u) {
    const double dprob = sw.frugality_weight * g_fr[u] +
                         sw.plasticity_weight * g_pl[u] +
                         sw.sensitivity_weight * g_se[u];
    grads[u] = dprob * probs[u] * (1.0 - probs[u]);
  }
  return grads;
}

std::size_t free_parameter_count(const Network& net, std::span<const double> probs,
                                 double threshold, MaskGranularity g) {
  if (probs.size() != net.mask_size(g))
    throw std::invalid_argument("free_parameter_count: mask size does not match network");
  std::size_t count = 0;
  for_owned_params(net, g, [&](std::size_t idx, double) {
    if (probs[idx] > threshold) ++count;
  });
  return count;
}

std::size_t owned_param_count(const Network& net, MaskGranularity g) {
  std::size_t count = 0;
  for_owned_params(net, g, [&](std::size_t, double) { ++count; });
  return count;
}

}  // namespace neuronml
