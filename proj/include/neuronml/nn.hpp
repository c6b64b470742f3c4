#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "neuronml/tensor.hpp"

namespace neuronml {

enum class Activation { kRelu, kTanh, kIdentity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

enum class LossKind { kMse, kCrossEntropy };

/// How mask entries map onto the network.
///   kPerUnit      — one mask entry per hidden unit; it scales the unit's
///                   post-activation output before it feeds the next layer.
///   kPerParameter — one mask entry per parameter (weights and biases of
///                   every layer); it scales the parameter itself.
enum class MaskGranularity { kPerUnit, kPerParameter };

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::kIdentity;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> biases;   // out
};

/// Fully connected feed-forward network.  Hidden layers share one
/// activation; the output layer is linear (losses add their own link:
/// squared error directly, softmax inside the cross-entropy).
struct Network {
  std::vector<Layer> layers;

  static Network mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                     std::size_t output_dim, Activation hidden_act);

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
  std::size_t hidden_unit_count() const;
  std::size_t param_count() const;

  /// Number of mask entries for a granularity: hidden units or parameters.
  std::size_t mask_size(MaskGranularity g) const;

  /// Uniform(-limit, limit) weights with limit = sqrt(6 / (fan_in + fan_out));
  /// biases zero.
  void init_params(std::mt19937_64& rng);

  /// Flatten / restore all parameters in layer order (weights then biases
  /// per layer).  Used by checkpointing and the finite-difference drivers.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

/// Gradients of a scalar loss with respect to everything trainable:
/// weights and biases per layer, plus one entry per mask logit.
struct GradBundle {
  std::vector<std::vector<double>> weight_grads;
  std::vector<std::vector<double>> bias_grads;
  std::vector<double> mask_logit_grads;

  static GradBundle zeros_like(const Network& net, MaskGranularity g);
  void scale(double s);
  void axpy(double s, const GradBundle& other);  // this += s * other
  bool finite() const;
};

/// Logistic sigmoid applied elementwise; mask probabilities are always
/// produced from logits through this.
std::vector<double> sigmoid(std::span<const double> logits);

/// Masked forward pass over a batch (inputs n x input_dim, outputs
/// n x output_dim).  `mask_probs` length must equal net.mask_size(g).
Tensor forward(const Network& net, std::span<const double> mask_probs,
               const Tensor& inputs, MaskGranularity g = MaskGranularity::kPerUnit);

/// Unmasked forward pass.
Tensor forward(const Network& net, const Tensor& inputs);

struct LossGrads {
  double loss = 0.0;
  GradBundle grads;
};

/// Loss under the masked network plus exact reverse-mode gradients with
/// respect to every weight, bias, and mask logit (the logit gradients are
/// chained through the sigmoid).  MSE targets are n x output_dim real
/// values; cross-entropy targets are n x 1 class indices.  Both losses are
/// means over the batch.
LossGrads loss_and_grads(const Network& net, std::span<const double> mask_logits,
                         const Tensor& inputs, const Tensor& targets, LossKind kind,
                         MaskGranularity g = MaskGranularity::kPerUnit);

/// Loss only (same semantics), used by the finite-difference drivers.
double loss_value(const Network& net, std::span<const double> mask_logits,
                  const Tensor& inputs, const Tensor& targets, LossKind kind,
                  MaskGranularity g = MaskGranularity::kPerUnit);

/// Central-difference verification of loss_and_grads over every weight,
/// bias, and mask logit.  Returns the maximum relative error
/// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
/// Requires 0 < step <= 1e-2 and at most 10^4 parameters.
double finite_diff_check(const Network& net, std::span<const double> mask_logits,
                         const Tensor& inputs, const Tensor& targets, LossKind kind,
                         MaskGranularity g = MaskGranularity::kPerUnit,
                         double step = 1e-5);

}  // namespace neuronml
