#include "neuronml/meta.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

#include "neuronml/rng.hpp"

namespace neuronml {

namespace {

// Logit at which the sigmoid saturates to exactly 1.0 in double precision.
// The baseline pins its mask here: probabilities are bit-for-bit one, and
// the p*(1-p) factor in every logit gradient is bit-for-bit zero, so the
// mask can never drift no matter what touches it.
constexpr double kOnesLogit = 100.0;

void require_cfg(bool ok, const char* field, const char* why) {
  if (!ok) throw ConfigError(std::string(field) + ": " + why);
}

Tensor vcat(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros(a.rows() + b.rows(), a.cols());
  std::copy(a.values.begin(), a.values.end(), out.values.begin());
  std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.size());
  return out;
}

double classification_accuracy(const Tensor& outputs, const Tensor& targets) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.rows(); ++i) {
    const double* row = outputs.row(i);
    std::size_t best = 0;
    for (std::size_t k = 1; k < outputs.cols(); ++k)
      if (row[k] > row[best]) best = k;
    if (best == std::size_t(std::llround(targets.values[i]))) ++hits;
  }
  return double(hits) / double(outputs.rows());
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

// Adam with standard bias correction; one instance per parameter group.
struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
  static constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;

  void step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(kB1, double(t));
    const double c2 = 1.0 - std::pow(kB2, double(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = kB1 * m[i] + (1.0 - kB1) * grads[i];
      v[i] = kB2 * v[i] + (1.0 - kB2) * grads[i] * grads[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }
};

std::vector<double> flat_weight_grads(const GradBundle& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.weight_grads.size(); ++l) {
    flat.insert(flat.end(), g.weight_grads[l].begin(), g.weight_grads[l].end());
    flat.insert(flat.end(), g.bias_grads[l].begin(), g.bias_grads[l].end());
  }
  return flat;
}

std::vector<double> mean_query_weight_grads(const std::vector<InnerResult>& results) {
  GradBundle mean = results.front().query_grads;
  for (std::size_t i = 1; i < results.size(); ++i)
    mean.axpy(1.0, results[i].query_grads);
  mean.scale(1.0 / double(results.size()));
  return flat_weight_grads(mean);
}

// Fill each result's plasticity terms against the rest of the batch and
// refresh the combined totals.
void fill_batch_plasticity(std::vector<InnerResult>& results,
                           const HebbianTracker& tracker, const StructureWeights& sw,
                           double threshold) {
  const std::vector<double> p = hebbian_probs(tracker);
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::vector<std::vector<double>> others;
    others.reserve(results.size() - 1);
    for (std::size_t j = 0; j < results.size(); ++j)
      if (j != i) others.push_back(results[j].adapted_probs);
    const PlasticityResult pl =
        plasticity_loss(results[i].adapted_probs, others, p, threshold);
    StructureLossParts& parts = results[i].structure;
    parts.soft_plasticity = pl.soft;
    parts.hard_overlap = pl.hard;
    parts.total = sw.frugality_weight * (parts.l1 + parts.hinge) +
                  sw.plasticity_weight * parts.soft_plasticity +
                  sw.sensitivity_weight * parts.sensitivity;
  }
}

std::vector<double> mean_structure_logit_grads(const MetaState& state,
                                               const std::vector<InnerResult>& results,
                                               const TrainConfig& cfg) {
  const double d = double(owned_param_count(state.net, cfg.granularity));
  std::vector<double> mean(state.mask.logits.size(), 0.0);
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::vector<std::vector<double>> others;
    others.reserve(results.size() - 1);
    for (std::size_t j = 0; j < results.size(); ++j)
      if (j != i) others.push_back(results[j].adapted_probs);
    const std::vector<double> g = structure_logit_grads(
        results[i].adapted_net, results[i].adapted_logits, others, state.tracker,
        results[i].sensitivity, cfg.structure, d, results[i].n_samples,
        cfg.granularity);
    for (std::size_t u = 0; u < mean.size(); ++u) mean[u] += g[u];
  }
  for (double& v : mean) v /= double(results.size());
  return mean;
}

}  // namespace

void TrainConfig::validate() const {
  require_cfg(task == "sinusoid" || task == "cluster", "task",
              "must be \"sinusoid\" or \"cluster\"");
  taskgen.validate();
  require_cfg(!hidden_units.empty(), "hidden_units", "need at least one hidden layer");
  for (std::size_t h : hidden_units)
    require_cfg(h >= 1, "hidden_units", "layer widths must be at least 1");
  require_cfg(meta_batch >= 1, "meta_batch", "must be at least 1");
  require_cfg(inner_lr > 0.0, "inner_lr", "must be positive");
  require_cfg(outer_lr > 0.0, "outer_lr", "must be positive");
  require_cfg(mask_lr > 0.0, "mask_lr", "must be positive");
  require_cfg(std::isfinite(initial_mask_logit), "initial_mask_logit", "must be finite");
  require_cfg(structure.frugality_weight >= 0.0, "frugality_weight", "must be non-negative");
  require_cfg(structure.plasticity_weight >= 0.0, "plasticity_weight", "must be non-negative");
  require_cfg(structure.sensitivity_weight >= 0.0, "sensitivity_weight", "must be non-negative");
  require_cfg(structure.hinge_weight >= 0.0, "hinge_weight", "must be non-negative");
  require_cfg(structure.budget_scale >= 0.0, "budget_scale", "must be non-negative");
  require_cfg(structure.sensitivity_floor >= 0.0, "sensitivity_floor", "must be non-negative");
  require_cfg(activation_threshold >= 0.0 && activation_threshold <= 1.0,
              "activation_threshold", "must lie in [0, 1]");
  require_cfg(hebbian_decay > 0.0 && hebbian_decay <= 1.0, "hebbian_decay",
              "must lie in (0, 1]");
  require_cfg(hebbian_temperature > 0.0, "hebbian_temperature", "must be positive");
  require_cfg(eval_tasks >= 1, "eval_tasks", "must be at least 1");
}

LossKind TrainConfig::loss_kind() const {
  return task == "sinusoid" ? LossKind::kMse : LossKind::kCrossEntropy;
}

std::uint64_t TrainConfig::effective_eval_seed() const {
  return eval_seed != 0 ? eval_seed : mix_seed(seed, 0xE7A1);
}

MetaState MetaState::init(const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t out_dim =
      cfg.loss_kind() == LossKind::kMse ? 1 : cfg.taskgen.n_way;
  MetaState state;
  state.net = Network::mlp(cfg.taskgen.input_dim, cfg.hidden_units, out_dim,
                           cfg.activation);
  std::mt19937_64 rng = make_stream(cfg.seed, kStreamInit);
  state.net.init_params(rng);

  const double logit = cfg.algorithm == Algorithm::kMamlBaseline
                           ? kOnesLogit
                           : cfg.initial_mask_logit;
  state.mask.logits.assign(state.net.mask_size(cfg.granularity), logit);
  state.mask.activation_threshold = cfg.activation_threshold;
  state.mask.granularity = cfg.granularity;
  state.tracker = HebbianTracker::make(state.mask.logits.size(), cfg.hebbian_decay,
                                       cfg.hebbian_temperature);
  return state;
}

Network apply_mask(const Network& net, std::span<const double> probs, MaskGranularity g) {
  if (probs.size() != net.mask_size(g))
    throw std::invalid_argument("apply_mask: mask size does not match network");
  Network masked = net;
  if (g == MaskGranularity::kPerParameter) {
    std::size_t idx = 0;
    for (Layer& l : masked.layers) {
      for (double& w : l.weights) w *= probs[idx++];
      for (double& b : l.biases) b *= probs[idx++];
    }
    return masked;
  }
  std::size_t unit = 0;
  for (std::size_t li = 0; li + 1 < masked.layers.size(); ++li) {
    Layer& l = masked.layers[li];
    for (std::size_t u = 0; u < l.out; ++u, ++unit) {
      double* w = l.weights.data() + u * l.in;
      for (std::size_t k = 0; k < l.in; ++k) w[k] *= probs[unit];
      l.biases[u] *= probs[unit];
    }
  }
  return masked;
}

InnerResult inner_adapt(const MetaState& state, const Task& task,
                        const TrainConfig& cfg, std::size_t steps, double lr) {
  const LossKind kind =
      task.kind == TaskKind::kRegression ? LossKind::kMse : LossKind::kCrossEntropy;
  const MaskGranularity g = cfg.granularity;
  const bool adapt_mask = cfg.algorithm == Algorithm::kNeuronml;

  InnerResult r;
  r.adapted_net = state.net;
  r.adapted_logits = state.mask.logits;
  r.support_trace.reserve(steps + 1);

  for (std::size_t s = 0; s < steps; ++s) {
    const LossGrads lg = loss_and_grads(r.adapted_net, r.adapted_logits,
                                        task.support_inputs, task.support_targets,
                                        kind, g);
    r.support_trace.push_back(lg.loss);
    if (!std::isfinite(lg.loss) || !lg.grads.finite())
      throw DivergenceError("inner adaptation produced a non-finite loss",
                            r.support_trace);
    for (std::size_t li = 0; li < r.adapted_net.layers.size(); ++li) {
      sgd_step(r.adapted_net.layers[li].weights, lg.grads.weight_grads[li], lr);
      sgd_step(r.adapted_net.layers[li].biases, lg.grads.bias_grads[li], lr);
    }
    if (adapt_mask) sgd_step(r.adapted_logits, lg.grads.mask_logit_grads, lr);
  }
  const double final_support = loss_value(r.adapted_net, r.adapted_logits,
                                          task.support_inputs, task.support_targets,
                                          kind, g);
  r.support_trace.push_back(final_support);
  if (!std::isfinite(final_support))
    throw DivergenceError("inner adaptation produced a non-finite loss",
                          r.support_trace);

  const LossGrads query = loss_and_grads(r.adapted_net, r.adapted_logits,
                                         task.query_inputs, task.query_targets, kind, g);
  r.query_loss = query.loss;
  r.query_grads = query.grads;
  if (!std::isfinite(r.query_loss) || !r.query_grads.finite())
    throw DivergenceError("query pass produced a non-finite loss", r.support_trace);

  r.adapted_probs = sigmoid(r.adapted_logits);
  if (kind == LossKind::kMse) {
    r.query_metric = query.loss;
  } else {
    const Tensor out = forward(r.adapted_net, r.adapted_probs, task.query_inputs, g);
    r.query_metric = classification_accuracy(out, task.query_targets);
  }

  // Structure terms at the adapted point, on everything the task showed us.
  const Tensor all_in = vcat(task.support_inputs, task.query_inputs);
  const Tensor all_tgt = vcat(task.support_targets, task.query_targets);
  r.sensitivity = sensitivity_scores(r.adapted_net, r.adapted_logits, all_in, all_tgt,
                                     kind, g);
  r.activation = activation_set(r.adapted_probs, cfg.activation_threshold);
  r.n_samples = double(all_in.rows());
  r.structure = structure_loss(r.adapted_net, r.adapted_probs, {}, state.tracker,
                               r.sensitivity, cfg.structure,
                               double(owned_param_count(r.adapted_net, g)),
                               r.n_samples, cfg.activation_threshold, g);
  return r;
}

void outer_weight_step(MetaState& state, const std::vector<InnerResult>& results,
                       double lr) {
  if (results.empty())
    throw std::invalid_argument("outer_weight_step: empty batch");
  const std::vector<double> grads = mean_query_weight_grads(results);
  std::vector<double> flat = state.net.flatten();
  sgd_step(flat, grads, lr);
  for (double v : flat)
    if (!std::isfinite(v))
      throw DivergenceError("outer weight step produced non-finite parameters", {});
  state.net.unflatten(flat);
}

void mask_step(MetaState& state, std::vector<InnerResult>& results,
               const TrainConfig& cfg, double lr) {
  if (results.empty()) throw std::invalid_argument("mask_step: empty batch");
  fill_batch_plasticity(results, state.tracker, cfg.structure,
                        cfg.activation_threshold);
  const std::vector<double> grads = mean_structure_logit_grads(state, results, cfg);
  sgd_step(state.mask.logits, grads, lr);
  for (double v : state.mask.logits)
    if (!std::isfinite(v))
      throw DivergenceError("mask step produced non-finite logits", {});
  // Single synchronization point per iteration: fold the batch into the
  // tracker in task order.
  for (const InnerResult& r : results)
    update_tracker(state.tracker, r.activation, r.sensitivity);
}

std::vector<Task> sample_task_batch(const TrainConfig& cfg, std::uint64_t iteration,
                                    const TaskSampler& sampler) {
  std::mt19937_64 rng = make_stream(cfg.seed, kStreamTasks, iteration);
  std::vector<Task> tasks;
  tasks.reserve(cfg.meta_batch);
  for (std::size_t i = 0; i < cfg.meta_batch; ++i) {
    if (sampler)
      tasks.push_back(sampler(rng));
    else if (cfg.task == "sinusoid")
      tasks.push_back(gen_sinusoid_task(cfg.taskgen, rng));
    else
      tasks.push_back(gen_cluster_task(cfg.taskgen, rng));
  }
  return tasks;
}

std::vector<Task> make_eval_tasks(const TrainConfig& cfg, std::size_t count) {
  std::mt19937_64 rng = make_stream(cfg.effective_eval_seed(), kStreamEval);
  std::vector<Task> tasks;
  tasks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (cfg.task == "sinusoid")
      tasks.push_back(gen_sinusoid_task(cfg.taskgen, rng));
    else
      tasks.push_back(gen_cluster_task(cfg.taskgen, rng));
  }
  return tasks;
}

EvalSummary evaluate(const MetaState& state, const std::vector<Task>& tasks,
                     std::size_t adapt_steps, const TrainConfig& cfg) {
  if (tasks.empty()) throw std::invalid_argument("evaluate: no tasks");
  EvalSummary summary;
  summary.metric = tasks.front().kind == TaskKind::kRegression ? "mse" : "accuracy";
  summary.task_count = tasks.size();

  std::vector<double> metrics;
  std::vector<std::vector<std::uint8_t>> activations;
  double density = 0.0;
  metrics.reserve(tasks.size());
  for (const Task& task : tasks) {
    const InnerResult r = inner_adapt(state, task, cfg, adapt_steps, cfg.inner_lr);
    metrics.push_back(r.query_metric);
    activations.push_back(r.activation);
    density += std::accumulate(r.adapted_probs.begin(), r.adapted_probs.end(), 0.0) /
               double(r.adapted_probs.size());
  }
  summary.mask_density = density / double(tasks.size());

  const double mean = std::accumulate(metrics.begin(), metrics.end(), 0.0) /
                      double(metrics.size());
  summary.metric_mean = mean;
  if (metrics.size() > 1) {
    double ss = 0.0;
    for (double m : metrics) ss += (m - mean) * (m - mean);
    summary.metric_std = std::sqrt(ss / double(metrics.size() - 1));
  }

  if (tasks.size() > 1) {
    const std::vector<double> p = hebbian_probs(state.tracker);
    double overlap = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < activations.size(); ++i)
      for (std::size_t j = i + 1; j < activations.size(); ++j, ++pairs)
        for (std::size_t u = 0; u < p.size(); ++u)
          if (activations[i][u] && activations[j][u]) overlap += p[u];
    summary.hard_overlap = overlap / double(pairs);
  }
  return summary;
}

namespace {

// Central-difference meta-gradient over the shared weights: perturb one
// parameter, re-run the whole adaptation, difference the mean query loss.
// Exact but quadratic in parameter count, hence the size guard.
std::vector<double> exact_meta_weight_grads(const MetaState& state,
                                            const std::vector<Task>& tasks,
                                            const TrainConfig& cfg) {
  if (state.net.param_count() > 100)
    throw ConfigError("meta_grad: exact mode supports at most 100 parameters");
  const double step = 1e-5;
  auto batch_query_loss = [&](const MetaState& s) {
    double total = 0.0;
    for (const Task& t : tasks)
      total += inner_adapt(s, t, cfg, cfg.inner_steps, cfg.inner_lr).query_loss;
    return total / double(tasks.size());
  };
  MetaState probe = state;
  std::vector<double> flat = state.net.flatten();
  std::vector<double> grads(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + step;
    probe.net.unflatten(flat);
    const double up = batch_query_loss(probe);
    flat[i] = orig - step;
    probe.net.unflatten(flat);
    const double dn = batch_query_loss(probe);
    flat[i] = orig;
    grads[i] = (up - dn) / (2.0 * step);
  }
  probe.net.unflatten(flat);
  return grads;
}

TrainResult run_training(TrainConfig cfg, const TaskSampler& sampler,
                         const IterationCallback& on_iteration) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult out;
  out.state = MetaState::init(cfg);
  out.task_checksum = 1469598103934665603ull;  // FNV-1a offset basis
  out.metrics.reserve(cfg.iterations);

  const bool learned_mask = cfg.algorithm == Algorithm::kNeuronml;
  AdamState adam_weights, adam_mask;
  const double d = double(owned_param_count(out.state.net, cfg.granularity));

  for (std::uint64_t iter = 0; iter < cfg.iterations; ++iter) {
    const auto iter_t0 = std::chrono::steady_clock::now();
    std::vector<Task> tasks = sample_task_batch(cfg, iter, sampler);
    for (const Task& t : tasks) out.task_checksum = fnv1a_accumulate(out.task_checksum, t);

    try {
      std::vector<InnerResult> results;
      results.reserve(tasks.size());
      for (const Task& t : tasks)
        results.push_back(inner_adapt(out.state, t, cfg, cfg.inner_steps, cfg.inner_lr));

      // Shared weights first...
      if (cfg.meta_grad == MetaGradMode::kExactFiniteDiff) {
        std::vector<double> grads = exact_meta_weight_grads(out.state, tasks, cfg);
        std::vector<double> flat = out.state.net.flatten();
        if (cfg.optimizer == Optimizer::kAdam)
          adam_weights.step(flat, grads, cfg.outer_lr);
        else
          sgd_step(flat, grads, cfg.outer_lr);
        out.state.net.unflatten(flat);
      } else if (cfg.optimizer == Optimizer::kAdam) {
        std::vector<double> grads = mean_query_weight_grads(results);
        std::vector<double> flat = out.state.net.flatten();
        adam_weights.step(flat, grads, cfg.outer_lr);
        for (double v : flat)
          if (!std::isfinite(v))
            throw DivergenceError("outer weight step produced non-finite parameters", {});
        out.state.net.unflatten(flat);
      } else {
        outer_weight_step(out.state, results, cfg.outer_lr);
      }

      // ...then the shared mask and the tracker.
      if (learned_mask) {
        if (cfg.optimizer == Optimizer::kAdam) {
          fill_batch_plasticity(results, out.state.tracker, cfg.structure,
                                cfg.activation_threshold);
          const std::vector<double> grads =
              mean_structure_logit_grads(out.state, results, cfg);
          adam_mask.step(out.state.mask.logits, grads, cfg.mask_lr);
          for (const InnerResult& r : results)
            update_tracker(out.state.tracker, r.activation, r.sensitivity);
        } else {
          mask_step(out.state, results, cfg, cfg.mask_lr);
        }
      } else {
        fill_batch_plasticity(results, out.state.tracker, cfg.structure,
                              cfg.activation_threshold);
      }

      out.state.iteration = iter + 1;

      MetricsRecord row;
      row.iteration = iter;
      for (const InnerResult& r : results) {
        row.weight_loss += r.query_loss;
        row.query_metric += r.query_metric;
        row.soft_plasticity += r.structure.soft_plasticity;
        row.hard_overlap += r.structure.hard_overlap;
        row.sensitivity_loss += r.structure.sensitivity;
      }
      const double inv = 1.0 / double(results.size());
      row.weight_loss *= inv;
      row.query_metric *= inv;
      row.soft_plasticity *= inv;
      row.hard_overlap *= inv;
      row.sensitivity_loss *= inv;

      const std::vector<double> probs = out.state.mask.probs();
      const double n_i =
          double(tasks.front().support_inputs.rows() + tasks.front().query_inputs.rows());
      row.frugality_bound = frugality_bound(d, n_i, cfg.structure.budget_const,
                                            cfg.structure.budget_scale);
      const FrugalityResult fr =
          frugality_loss(out.state.net, probs, cfg.granularity, row.frugality_bound, 1.0);
      row.l1_norm = fr.l1;
      row.hinge_violation = std::max(0.0, fr.l1 - row.frugality_bound);
      row.mask_density = std::accumulate(probs.begin(), probs.end(), 0.0) /
                         double(probs.size());
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - iter_t0)
                        .count();
      out.metrics.push_back(row);
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(e, out.metrics);
    }

    if (cfg.eval_cadence > 0 && (iter + 1) % cfg.eval_cadence == 0 &&
        iter + 1 < cfg.iterations) {
      const std::vector<Task> eval_tasks = make_eval_tasks(cfg, cfg.eval_tasks);
      out.eval_history.emplace_back(iter + 1,
                                    evaluate(out.state, eval_tasks,
                                             cfg.eval_adapt_steps, cfg));
    }
    if (on_iteration) on_iteration(out.state);
  }

  const std::vector<Task> eval_tasks = make_eval_tasks(cfg, cfg.eval_tasks);
  out.final_eval = evaluate(out.state, eval_tasks, cfg.eval_adapt_steps, cfg);
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TaskSampler& sampler,
                  const IterationCallback& on_iteration) {
  return run_training(cfg, sampler, on_iteration);
}

TrainResult train_maml_baseline(const TrainConfig& cfg, const TaskSampler& sampler,
                                const IterationCallback& on_iteration) {
  TrainConfig baseline = cfg;
  baseline.algorithm = Algorithm::kMamlBaseline;
  return run_training(baseline, sampler, on_iteration);
}

std::uint64_t fnv1a_accumulate(std::uint64_t hash, const Task& task) {
  auto fold_u64 = [&hash](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      hash ^= (v >> (8 * b)) & 0xffu;
      hash *= 1099511628211ull;
    }
  };
  auto fold_tensor = [&](const Tensor& t) {
    for (double x : t.values) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      fold_u64(bits);
    }
  };
  fold_u64(task.kind == TaskKind::kRegression ? 0 : 1);
  fold_u64(task.n_way);
  fold_tensor(task.support_inputs);
  fold_tensor(task.support_targets);
  fold_tensor(task.query_inputs);
  fold_tensor(task.query_targets);
  return hash;
}

}  // namespace neuronml
