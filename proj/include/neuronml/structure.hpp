#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "neuronml/nn.hpp"
#include "neuronml/tensor.hpp"

namespace neuronml {

// The learnable structure sits beside the weights: a vector of logits, one
// per maskable entry, squashed to activation probabilities.  Under per-unit
// granularity a hidden unit owns its incoming weights and its bias; those
// are the parameters its probability scales in ||M .* theta||_1 and the
// ones summed for its sensitivity score.  Output-layer parameters have no
// owning unit and stay outside those sums.  Under per-parameter granularity
// every parameter owns itself.

struct StructureMask {
  std::vector<double> logits;
  double activation_threshold = 0.5;  // probability above which a unit counts as on
  MaskGranularity granularity = MaskGranularity::kPerUnit;

  std::vector<double> probs() const { return sigmoid(logits); }
};

/// Binary activation set: 1 where prob strictly exceeds the threshold.
std::vector<std::uint8_t> activation_set(std::span<const double> probs, double threshold);

/// Exponential moving average of per-unit impact, read out as a softmax.
/// Units that fire get pulled toward the latest impact; silent units decay
/// toward zero at the same rate.
struct HebbianTracker {
  std::vector<double> importance;
  double decay = 0.1;        // EMA step in (0, 1]
  double temperature = 1.0;  // softmax sharpness, > 0

  static HebbianTracker make(std::size_t n, double decay, double temperature);
};

/// softmax(temperature * importance), max-subtracted for stability.
std::vector<double> hebbian_probs(const HebbianTracker& tracker);

/// One EMA step.  `impacts` supplies the new impact for units whose
/// activation flag is set; others only decay.
void update_tracker(HebbianTracker& tracker, std::span<const std::uint8_t> activated,
                    std::span<const double> impacts);

/// Sparsity budget: max{c, scale * d * ln(n_samples / d)} for a mask of
/// dimension d fit on n_samples points.  Few-shot regimes (n < d) drive the
/// log term negative, leaving the constant floor in charge.
double frugality_bound(double d, double n_samples, double c, double scale);

struct FrugalityResult {
  double l1 = 0.0;       // sum over owned params of prob(owner) * |weight|
  double penalty = 0.0;  // hinge_weight * max(0, l1 - bound)
};

FrugalityResult frugality_loss(const Network& net, std::span<const double> probs,
                               MaskGranularity g, double bound, double hinge_weight);

/// d(l1 + penalty)/d(prob), weights held fixed.
std::vector<double> frugality_prob_grads(const Network& net, std::span<const double> probs,
                                         MaskGranularity g, double bound,
                                         double hinge_weight);

struct PlasticityResult {
  double soft = 0.0;  // sum over other masks of <probs_i, probs_j>_p
  double hard = 0.0;  // same with binary activation sets (reported, not differentiated)
};

/// Overlap of one mask against the other masks in a batch, each unit
/// weighted by its Hebbian probability.  The soft form multiplies
/// probabilities and is what gradients flow through; the hard form counts
/// joint activations above `threshold`.
PlasticityResult plasticity_loss(std::span<const double> probs_i,
                                 const std::vector<std::vector<double>>& probs_others,
                                 std::span<const double> hebbian_p, double threshold);

/// d(soft)/d(probs_i); other masks held fixed.
std::vector<double> plasticity_prob_grads(std::span<const double> probs_i,
                                          const std::vector<std::vector<double>>& probs_others,
                                          std::span<const double> hebbian_p);

/// Per-entry sensitivity: sum of |d loss / d param| over the parameters the
/// entry owns, evaluated at the masked configuration on the given data.
std::vector<double> sensitivity_scores(const Network& net, std::span<const double> mask_logits,
                                       const Tensor& inputs, const Tensor& targets,
                                       LossKind kind, MaskGranularity g);

/// Sum over entries of -ln((s + floor) / S') * prob, with S' the floored
/// total.  Zero scores with a zero floor are a domain error.
double sensitivity_loss(std::span<const double> probs, std::span<const double> scores,
                        double floor);

/// d(sensitivity_loss)/d(prob); scores treated as data.
std::vector<double> sensitivity_prob_grads(std::span<const double> scores, double floor);

/// Mixing weights and shared constants for the three structure terms.
struct StructureWeights {
  double frugality_weight = 0.5;
  double plasticity_weight = 0.5;
  double sensitivity_weight = 0.5;
  double budget_const = 50.0;     // c in the sparsity budget
  double budget_scale = 0.5;      // scale on the d*ln(n/d) term
  double hinge_weight = 1.0;      // slope of the over-budget penalty
  double sensitivity_floor = 1e-8;
};

struct StructureLossParts {
  double total = 0.0;
  double l1 = 0.0;
  double hinge = 0.0;
  double bound = 0.0;
  double soft_plasticity = 0.0;
  double hard_overlap = 0.0;
  double sensitivity = 0.0;
};

/// Weighted sum of the three terms for one task's mask against the rest of
/// its batch:
///   total = fr_w * (l1 + hinge) + pl_w * soft + se_w * sensitivity.
/// `d` is the mask-owned parameter dimension, `n_samples` the task's total
/// sample count; both feed the sparsity budget.
StructureLossParts structure_loss(const Network& net, std::span<const double> probs_i,
                                  const std::vector<std::vector<double>>& probs_others,
                                  const HebbianTracker& tracker,
                                  std::span<const double> scores, const StructureWeights& sw,
                                  double d, double n_samples, double threshold,
                                  MaskGranularity g);

/// Gradient of the weighted structure loss with respect to the mask
/// *logits* (chained through the sigmoid).  Scores and Hebbian
/// probabilities are data; weights are fixed.
std::vector<double> structure_logit_grads(const Network& net, std::span<const double> logits_i,
                                          const std::vector<std::vector<double>>& probs_others,
                                          const HebbianTracker& tracker,
                                          std::span<const double> scores,
                                          const StructureWeights& sw, double d,
                                          double n_samples, MaskGranularity g);

/// Count of parameters owned by entries whose probability strictly exceeds
/// the threshold; the free-parameter count fed to model selection.
std::size_t free_parameter_count(const Network& net, std::span<const double> probs,
                                 double threshold, MaskGranularity g);

/// Dimension of the masked parameter vector: every parameter some mask
/// entry owns.  This is the `d` the sparsity budget sees.
std::size_t owned_param_count(const Network& net, MaskGranularity g);

}  // namespace neuronml
