#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neuronml/errors.hpp"
#include "neuronml/metrics.hpp"
#include "neuronml/nn.hpp"
#include "neuronml/structure.hpp"
#include "neuronml/taskgen.hpp"

namespace neuronml {

enum class Algorithm { kNeuronml, kMamlBaseline };
enum class Optimizer { kSgd, kAdam };
enum class MetaGradMode { kFirstOrder, kExactFiniteDiff };

/// Everything a training run needs.  Flat on purpose: it mirrors the flat
/// config file one to one.
struct TrainConfig {
  Algorithm algorithm = Algorithm::kNeuronml;
  std::uint64_t seed = 0;

  // Tasks.
  std::string task = "sinusoid";  // sinusoid | cluster
  TaskGenConfig taskgen;

  // Model.
  std::vector<std::size_t> hidden_units = {40, 40};
  Activation activation = Activation::kTanh;
  MaskGranularity granularity = MaskGranularity::kPerUnit;
  double initial_mask_logit = 1.0;

  // Optimization.
  std::uint64_t iterations = 10000;
  std::size_t meta_batch = 4;   // tasks per meta-iteration
  std::size_t inner_steps = 1;  // adaptation steps during training
  double inner_lr = 0.01;
  double outer_lr = 0.001;      // shared-weight step size
  double mask_lr = 0.001;       // shared-mask step size
  Optimizer optimizer = Optimizer::kSgd;
  MetaGradMode meta_grad = MetaGradMode::kFirstOrder;

  // Structure terms.
  StructureWeights structure;
  double activation_threshold = 0.5;
  double hebbian_decay = 0.1;
  double hebbian_temperature = 1.0;

  // Held-out evaluation.
  std::size_t eval_tasks = 100;
  std::size_t eval_adapt_steps = 10;
  std::uint64_t eval_cadence = 0;  // 0 = final evaluation only
  std::uint64_t eval_seed = 0;     // 0 = derive from seed

  void validate() const;  // throws ConfigError naming the bad field
  LossKind loss_kind() const;
  std::uint64_t effective_eval_seed() const;
};

/// Shared slow state: weights, mask, Hebbian tracker, iteration counter.
struct MetaState {
  Network net;
  StructureMask mask;
  HebbianTracker tracker;
  std::uint64_t iteration = 0;

  static MetaState init(const TrainConfig& cfg);
};

/// Product of adapting the shared state to one task.
struct InnerResult {
  Network adapted_net;
  std::vector<double> adapted_logits;
  std::vector<double> adapted_probs;
  std::vector<double> support_trace;  // support loss before each step and after the last
  double query_loss = 0.0;
  double query_metric = 0.0;          // MSE or accuracy on the query set
  GradBundle query_grads;             // taken at the adapted point
  std::vector<double> sensitivity;    // per mask entry, on support + query
  std::vector<std::uint8_t> activation;
  StructureLossParts structure;       // plasticity fields filled at batch level
  double n_samples = 0.0;             // support + query rows (feeds the sparsity budget)
};

/// Returns params scaled by their owner's mask probability.  Per-unit
/// masks broadcast over a hidden unit's incoming weights and bias (output
/// parameters are left alone); per-parameter masks multiply elementwise.
Network apply_mask(const Network& net, std::span<const double> probs, MaskGranularity g);

/// Gradient-descend the support loss for `steps` full-batch steps, moving
/// both the weight copy and the mask-logit copy at the same rate.  Collects
/// query loss/gradients, sensitivity scores (support + query), and the
/// frugality/sensitivity structure parts at the adapted point.
InnerResult inner_adapt(const MetaState& state, const Task& task,
                        const TrainConfig& cfg, std::size_t steps, double lr);

/// First-order outer step on the shared weights: average the tasks' query
/// gradients at their adapted points and take one descent step.  Mask and
/// tracker are untouched.
void outer_weight_step(MetaState& state, const std::vector<InnerResult>& results,
                       double lr);

/// Outer step on the shared mask logits: average each task's structure-loss
/// gradient (frugality + soft plasticity against the batch's other adapted
/// masks + sensitivity) and descend; afterwards fold the batch's activation
/// sets and sensitivity scores into the Hebbian tracker.  Weights are
/// untouched.  Also fills the plasticity parts of each InnerResult.
void mask_step(MetaState& state, std::vector<InnerResult>& results,
               const TrainConfig& cfg, double lr);

struct EvalSummary {
  std::string metric;          // "mse" or "accuracy"
  double metric_mean = 0.0;
  double metric_std = 0.0;     // sample standard deviation over tasks
  double mask_density = 0.0;   // mean adapted mask probability
  double hard_overlap = 0.0;   // mean pairwise thresholded overlap across tasks
  std::size_t task_count = 0;
};

/// Adaptation-then-query over a fixed task set.  Every task adapts from the
/// same shared state.
EvalSummary evaluate(const MetaState& state, const std::vector<Task>& tasks,
                     std::size_t adapt_steps, const TrainConfig& cfg);

/// Optional replacement for the built-in task source (used by tests to
/// train on custom task families).
using TaskSampler = std::function<Task(std::mt19937_64&)>;

/// Called after every completed meta-iteration (periodic checkpointing,
/// progress reporting).
using IterationCallback = std::function<void(const MetaState&)>;

struct TrainResult {
  MetaState state;
  std::vector<MetricsRecord> metrics;
  EvalSummary final_eval;
  std::vector<std::pair<std::uint64_t, EvalSummary>> eval_history;
  std::uint64_t task_checksum = 0;  // FNV-1a over every sampled task's bytes
  double wall_ms = 0.0;
};

/// DivergenceError that also carries the metrics rows completed before the
/// loop blew up, so callers can persist a partial run.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const DivergenceError& cause, std::vector<MetricsRecord> partial)
      : DivergenceError(cause.what(), cause.loss_trace()),
        partial_metrics_(std::move(partial)) {}

  const std::vector<MetricsRecord>& partial_metrics() const { return partial_metrics_; }

 private:
  std::vector<MetricsRecord> partial_metrics_;
};

/// Full bi-level loop: per iteration, adapt to a batch of tasks, step the
/// shared weights, then the shared mask, then the tracker; record one
/// metrics row.  Non-finite losses or parameters raise TrainingDiverged
/// with the completed rows attached.
TrainResult train(const TrainConfig& cfg, const TaskSampler& sampler = {},
                  const IterationCallback& on_iteration = {});

/// Same loop with the mask pinned to all-ones and structure losses logged
/// but never applied: plain first-order meta-learning of the weights.
TrainResult train_maml_baseline(const TrainConfig& cfg, const TaskSampler& sampler = {},
                                const IterationCallback& on_iteration = {});

/// The per-iteration task batch `train` would draw, exposed so ablation
/// arms and tests can verify they share a task sequence.
std::vector<Task> sample_task_batch(const TrainConfig& cfg, std::uint64_t iteration,
                                    const TaskSampler& sampler);

/// Held-out evaluation tasks for a config (deterministic in the eval seed).
std::vector<Task> make_eval_tasks(const TrainConfig& cfg, std::size_t count);

std::uint64_t fnv1a_accumulate(std::uint64_t hash, const Task& task);

}  // namespace neuronml
