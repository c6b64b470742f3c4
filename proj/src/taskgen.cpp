#include "neuronml/taskgen.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "neuronml/errors.hpp"
#include "neuronml/fsutil.hpp"

namespace neuronml {

namespace {

constexpr double kInputLo = -5.0;
constexpr double kInputHi = 5.0;

void require(bool ok, const char* field, const char* why) {
  if (!ok) throw ConfigError(std::string("taskgen.") + field + ": " + why);
}

}  // namespace

void TaskGenConfig::validate() const {
  require(k_shot >= 1, "k_shot", "must be at least 1");
  require(query_count >= 1, "query_count", "must be at least 1");
  require(input_dim >= 1, "input_dim", "must be at least 1");
  require(n_way >= 2, "n_way", "need at least two classes");
  require(amplitude_min <= amplitude_max, "amplitude_min", "range is inverted");
  require(frequency_min <= frequency_max, "frequency_min", "range is inverted");
  require(phase_min <= phase_max, "phase_min", "range is inverted");
  require(amplitude_min > 0.0, "amplitude_min", "must be positive");
  require(noise_sigma >= 0.0, "noise_sigma", "must be non-negative");
  require(separation >= 0.0, "separation", "must be non-negative");
  require(ssl_blocks >= 1, "ssl_blocks", "must be at least 1");
  require(ssl_views >= 2, "ssl_views", "need at least one support and one query view");
  require(ssl_noise >= 0.0, "ssl_noise", "must be non-negative");
}

Task gen_sinusoid_task(const TaskGenConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> amp(cfg.amplitude_min, cfg.amplitude_max);
  std::uniform_real_distribution<double> freq(cfg.frequency_min, cfg.frequency_max);
  std::uniform_real_distribution<double> phase(cfg.phase_min, cfg.phase_max);
  std::uniform_real_distribution<double> xdist(kInputLo, kInputHi);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);

  const double a = amp(rng);
  const double w = freq(rng);
  const double b = phase(rng);

  Task task;
  task.kind = TaskKind::kRegression;
  task.meta["amplitude"] = {a};
  task.meta["frequency"] = {w};
  task.meta["phase"] = {b};

  auto fill = [&](Tensor& xs, Tensor& ys, std::size_t count) {
    xs = Tensor::zeros(count, 1);
    ys = Tensor::zeros(count, 1);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = xdist(rng);
      double y = a * std::sin(w * x + b);
      if (cfg.noise_sigma > 0.0) y += noise(rng);
      xs.values[i] = x;
      ys.values[i] = y;
    }
  };
  fill(task.support_inputs, task.support_targets, cfg.k_shot);
  fill(task.query_inputs, task.query_targets, cfg.query_count);
  return task;
}

Task gen_cluster_task(const TaskGenConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::normal_distribution<double> unit(0.0, 1.0);

  Task task;
  task.kind = TaskKind::kClassification;
  task.n_way = cfg.n_way;

  std::vector<double> centroids(cfg.n_way * cfg.input_dim);
  for (double& c : centroids) c = cfg.separation * unit(rng);
  task.meta["centroids"] = centroids;

  auto fill = [&](Tensor& xs, Tensor& ys, std::size_t per_class) {
    xs = Tensor::zeros(cfg.n_way * per_class, cfg.input_dim);
    ys = Tensor::zeros(cfg.n_way * per_class, 1);
    std::size_t row = 0;
    for (std::size_t c = 0; c < cfg.n_way; ++c) {
      const double* mu = centroids.data() + c * cfg.input_dim;
      for (std::size_t i = 0; i < per_class; ++i, ++row) {
        double* x = xs.row(row);
        for (std::size_t k = 0; k < cfg.input_dim; ++k) x[k] = mu[k] + unit(rng);
        ys.values[row] = double(c);
      }
    }
  };
  fill(task.support_inputs, task.support_targets, cfg.k_shot);
  fill(task.query_inputs, task.query_targets, cfg.query_count);
  return task;
}

std::vector<Task> build_ssl_batch(const std::vector<std::vector<double>>& pool,
                                  const TaskGenConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (pool.empty()) throw ConfigError("taskgen.pool: empty pool");
  const std::size_t dim = pool.front().size();
  if (dim == 0) throw ConfigError("taskgen.pool: zero-dimensional items");
  for (const auto& item : pool)
    if (item.size() != dim) throw ConfigError("taskgen.pool: ragged item dimensions");
  if (pool.size() % cfg.ssl_blocks != 0)
    throw ConfigError("taskgen.ssl_blocks: pool size must divide evenly into blocks");

  const std::size_t per_block = pool.size() / cfg.ssl_blocks;
  if (per_block < 2)
    throw ConfigError("taskgen.ssl_blocks: blocks need at least two items for a task");
  const std::size_t support_views = (cfg.ssl_views + 1) / 2;
  const std::size_t query_views = cfg.ssl_views - support_views;

  std::uniform_real_distribution<double> scale(0.8, 1.2);
  std::normal_distribution<double> noise(0.0, cfg.ssl_noise);

  std::vector<Task> tasks;
  tasks.reserve(cfg.ssl_blocks);
  for (std::size_t b = 0; b < cfg.ssl_blocks; ++b) {
    Task task;
    task.kind = TaskKind::kClassification;
    task.n_way = per_block;
    task.meta["block"] = {double(b)};
    task.support_inputs = Tensor::zeros(per_block * support_views, dim);
    task.support_targets = Tensor::zeros(per_block * support_views, 1);
    task.query_inputs = Tensor::zeros(per_block * query_views, dim);
    task.query_targets = Tensor::zeros(per_block * query_views, 1);

    std::size_t srow = 0, qrow = 0;
    for (std::size_t item = 0; item < per_block; ++item) {
      const std::vector<double>& x = pool[b * per_block + item];
      for (std::size_t v = 0; v < cfg.ssl_views; ++v) {
        const double s = cfg.ssl_scaling ? scale(rng) : 1.0;
        const bool is_support = v < support_views;
        double* out = is_support ? task.support_inputs.row(srow)
                                 : task.query_inputs.row(qrow);
        for (std::size_t k = 0; k < dim; ++k) {
          double view = s * x[k];
          if (cfg.ssl_noise > 0.0) view += noise(rng);
          out[k] = view;
        }
        if (is_support)
          task.support_targets.values[srow++] = double(item);
        else
          task.query_targets.values[qrow++] = double(item);
      }
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

namespace {

nlohmann::json tensor_to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape}, {"values", t.values}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<std::size_t>>();
  t.values = j.at("values").get<std::vector<double>>();
  std::size_t expect = 1;
  for (std::size_t s : t.shape) expect *= s;
  if (t.shape.empty() || expect != t.values.size())
    throw std::runtime_error("task dump: tensor shape/value mismatch");
  return t;
}

}  // namespace

void dump_tasks(const std::string& path, const std::vector<Task>& tasks) {
  nlohmann::json doc;
  doc["format"] = "task-batch";
  doc["version"] = 1;
  nlohmann::json list = nlohmann::json::array();
  for (const Task& t : tasks) {
    nlohmann::json jt;
    jt["kind"] = t.kind == TaskKind::kRegression ? "regression" : "classification";
    jt["n_way"] = t.n_way;
    jt["support_inputs"] = tensor_to_json(t.support_inputs);
    jt["support_targets"] = tensor_to_json(t.support_targets);
    jt["query_inputs"] = tensor_to_json(t.query_inputs);
    jt["query_targets"] = tensor_to_json(t.query_targets);
    jt["meta"] = t.meta;
    list.push_back(std::move(jt));
  }
  doc["tasks"] = std::move(list);
  atomic_write(path, doc.dump(2) + "\n");
}

std::vector<Task> load_task_dump(const std::string& path) {
  const nlohmann::json doc = nlohmann::json::parse(read_file(path));
  if (doc.value("format", "") != "task-batch")
    throw std::runtime_error("task dump: unrecognized format");
  std::vector<Task> tasks;
  for (const auto& jt : doc.at("tasks")) {
    Task t;
    t.kind = jt.at("kind").get<std::string>() == "regression"
                 ? TaskKind::kRegression
                 : TaskKind::kClassification;
    t.n_way = jt.at("n_way").get<std::size_t>();
    t.support_inputs = tensor_from_json(jt.at("support_inputs"));
    t.support_targets = tensor_from_json(jt.at("support_targets"));
    t.query_inputs = tensor_from_json(jt.at("query_inputs"));
    t.query_targets = tensor_from_json(jt.at("query_targets"));
    t.meta = jt.at("meta").get<std::map<std::string, std::vector<double>>>();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace neuronml
