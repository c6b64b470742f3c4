#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "neuronml/tensor.hpp"

namespace neuronml {

enum class TaskKind { kRegression, kClassification };

/// One few-shot episode: a support set to adapt on and a query set to score.
/// Regression targets are real values; classification targets are class
/// indices stored as doubles.  `meta` echoes the generating parameters
/// (amplitude/frequency/phase, centroid coordinates, block index) so dumps
/// are self-describing.
struct Task {
  TaskKind kind = TaskKind::kRegression;
  std::size_t n_way = 0;  // classes; 0 for regression
  Tensor support_inputs;
  Tensor support_targets;
  Tensor query_inputs;
  Tensor query_targets;
  std::map<std::string, std::vector<double>> meta;
};

struct TaskGenConfig {
  std::size_t k_shot = 5;        // support examples per task (per class if classifying)
  std::size_t query_count = 10;  // query examples (per class if classifying)
  std::size_t input_dim = 1;
  std::size_t n_way = 2;

  // Sinusoid family: y = amplitude * sin(frequency * x + phase) + noise,
  // x uniform in [-5, 5].
  double amplitude_min = 0.1;
  double amplitude_max = 5.0;
  double frequency_min = 0.5;
  double frequency_max = 2.0;
  double phase_min = 0.0;
  double phase_max = 6.283185307179586;
  double noise_sigma = 0.3;

  // Cluster family: class c draws points N(centroid_c, I) with centroids
  // N(0, separation^2 * I).
  double separation = 3.0;

  // Self-supervised episodes built from an unlabeled pool.
  std::size_t ssl_blocks = 2;    // pool is cut into this many tasks
  std::size_t ssl_views = 3;     // augmented views per item
  double ssl_noise = 0.1;        // additive augmentation noise sigma
  bool ssl_scaling = true;       // multiply by U(0.8, 1.2) before the noise

  void validate() const;  // throws ConfigError naming the bad field
};

/// Sample one sinusoid regression episode.
Task gen_sinusoid_task(const TaskGenConfig& cfg, std::mt19937_64& rng);

/// Sample one n-way Gaussian-cluster classification episode with exactly
/// k_shot support and query_count query points per class.
Task gen_cluster_task(const TaskGenConfig& cfg, std::mt19937_64& rng);

/// Slice an unlabeled pool into cfg.ssl_blocks pseudo-labeled episodes.
/// Each block's items become classes; every item is expanded into
/// cfg.ssl_views augmented views, the first ceil(views/2) as support and
/// the rest as query.  Pool size must divide evenly by the block count.
std::vector<Task> build_ssl_batch(const std::vector<std::vector<double>>& pool,
                                  const TaskGenConfig& cfg, std::mt19937_64& rng);

/// Write a batch of tasks to one JSON file (inputs/targets as arrays,
/// meta echoed).  Atomic: the file appears complete or not at all.
void dump_tasks(const std::string& path, const std::vector<Task>& tasks);

/// Read back a dump written by dump_tasks.
std::vector<Task> load_task_dump(const std::string& path);

}  // namespace neuronml
