#include "neuronml/config.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "neuronml/errors.hpp"
#include "neuronml/fsutil.hpp"

namespace neuronml {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw ConfigError("config key \"" + key + "\": " + why);
}

double get_double(const json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "expected a number");
  return v.get<double>();
}

std::uint64_t get_uint(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    bad_key(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad_key(key, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_key(key, "expected a string");
  return v.get<std::string>();
}

std::vector<std::size_t> get_uint_array(const json& v, const std::string& key) {
  if (!v.is_array()) bad_key(key, "expected an array of positive integers");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() && !e.is_number_unsigned())
      bad_key(key, "expected an array of positive integers");
    const auto n = e.get<std::int64_t>();
    if (n < 1) bad_key(key, "expected an array of positive integers");
    out.push_back(std::size_t(n));
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (checkpoint_cadence < 1)
    throw ConfigError("config key \"checkpoint_cadence\": must be at least 1");
  if (metrics_filename.empty())
    throw ConfigError("config key \"metrics_filename\": must not be empty");
  if (output_dir.empty())
    throw ConfigError("config key \"output_dir\": must not be empty");
}

TrainConfig RunConfig::effective_train() const {
  TrainConfig t = train;
  if (disable_frugality) t.structure.frugality_weight = 0.0;
  if (disable_plasticity) t.structure.plasticity_weight = 0.0;
  if (disable_sensitivity) t.structure.sensitivity_weight = 0.0;
  return t;
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

  RunConfig cfg;
  TrainConfig& t = cfg.train;
  bool activation_given = false;

  for (const auto& [key, value] : doc.items()) {
    if (key == "algorithm") {
      const std::string v = get_string(value, key);
      if (v == "neuronml")
        t.algorithm = Algorithm::kNeuronml;
      else if (v == "maml")
        t.algorithm = Algorithm::kMamlBaseline;
      else
        bad_key(key, "expected \"neuronml\" or \"maml\"");
    } else if (key == "seed") {
      t.seed = get_uint(value, key);
    } else if (key == "task") {
      t.task = get_string(value, key);
    } else if (key == "k_shot") {
      t.taskgen.k_shot = get_uint(value, key);
    } else if (key == "query_count") {
      t.taskgen.query_count = get_uint(value, key);
    } else if (key == "input_dim") {
      t.taskgen.input_dim = get_uint(value, key);
    } else if (key == "n_way") {
      t.taskgen.n_way = get_uint(value, key);
    } else if (key == "amplitude_min") {
      t.taskgen.amplitude_min = get_double(value, key);
    } else if (key == "amplitude_max") {
      t.taskgen.amplitude_max = get_double(value, key);
    } else if (key == "frequency_min") {
      t.taskgen.frequency_min = get_double(value, key);
    } else if (key == "frequency_max") {
      t.taskgen.frequency_max = get_double(value, key);
    } else if (key == "phase_min") {
      t.taskgen.phase_min = get_double(value, key);
    } else if (key == "phase_max") {
      t.taskgen.phase_max = get_double(value, key);
    } else if (key == "noise_sigma") {
      t.taskgen.noise_sigma = get_double(value, key);
    } else if (key == "separation") {
      t.taskgen.separation = get_double(value, key);
    } else if (key == "ssl_blocks") {
      t.taskgen.ssl_blocks = get_uint(value, key);
    } else if (key == "ssl_views") {
      t.taskgen.ssl_views = get_uint(value, key);
    } else if (key == "ssl_noise") {
      t.taskgen.ssl_noise = get_double(value, key);
    } else if (key == "ssl_scaling") {
      t.taskgen.ssl_scaling = get_bool(value, key);
    } else if (key == "hidden_units") {
      t.hidden_units = get_uint_array(value, key);
    } else if (key == "activation") {
      try {
        t.activation = activation_from_string(get_string(value, key));
      } catch (const std::invalid_argument& e) {
        bad_key(key, e.what());
      }
      activation_given = true;
    } else if (key == "granularity") {
      const std::string v = get_string(value, key);
      if (v == "per_unit")
        t.granularity = MaskGranularity::kPerUnit;
      else if (v == "per_parameter")
        t.granularity = MaskGranularity::kPerParameter;
      else
        bad_key(key, "expected \"per_unit\" or \"per_parameter\"");
    } else if (key == "initial_mask_logit") {
      t.initial_mask_logit = get_double(value, key);
    } else if (key == "iterations") {
      t.iterations = get_uint(value, key);
    } else if (key == "meta_batch") {
      t.meta_batch = get_uint(value, key);
    } else if (key == "inner_steps") {
      t.inner_steps = get_uint(value, key);
    } else if (key == "inner_lr") {
      t.inner_lr = get_double(value, key);
    } else if (key == "outer_lr") {
      t.outer_lr = get_double(value, key);
    } else if (key == "mask_lr") {
      t.mask_lr = get_double(value, key);
    } else if (key == "optimizer") {
      const std::string v = get_string(value, key);
      if (v == "sgd")
        t.optimizer = Optimizer::kSgd;
      else if (v == "adam")
        t.optimizer = Optimizer::kAdam;
      else
        bad_key(key, "expected \"sgd\" or \"adam\"");
    } else if (key == "meta_grad") {
      const std::string v = get_string(value, key);
      if (v == "first_order")
        t.meta_grad = MetaGradMode::kFirstOrder;
      else if (v == "exact_fd")
        t.meta_grad = MetaGradMode::kExactFiniteDiff;
      else
        bad_key(key, "expected \"first_order\" or \"exact_fd\"");
    } else if (key == "frugality_weight") {
      t.structure.frugality_weight = get_double(value, key);
    } else if (key == "plasticity_weight") {
      t.structure.plasticity_weight = get_double(value, key);
    } else if (key == "sensitivity_weight") {
      t.structure.sensitivity_weight = get_double(value, key);
    } else if (key == "budget_const") {
      t.structure.budget_const = get_double(value, key);
    } else if (key == "budget_scale") {
      t.structure.budget_scale = get_double(value, key);
    } else if (key == "hinge_weight") {
      t.structure.hinge_weight = get_double(value, key);
    } else if (key == "sensitivity_floor") {
      t.structure.sensitivity_floor = get_double(value, key);
    } else if (key == "activation_threshold") {
      t.activation_threshold = get_double(value, key);
    } else if (key == "hebbian_decay") {
      t.hebbian_decay = get_double(value, key);
    } else if (key == "hebbian_temperature") {
      t.hebbian_temperature = get_double(value, key);
    } else if (key == "eval_tasks") {
      t.eval_tasks = get_uint(value, key);
    } else if (key == "eval_adapt_steps") {
      t.eval_adapt_steps = get_uint(value, key);
    } else if (key == "eval_cadence") {
      t.eval_cadence = get_uint(value, key);
    } else if (key == "eval_seed") {
      t.eval_seed = get_uint(value, key);
    } else if (key == "output_dir") {
      cfg.output_dir = get_string(value, key);
    } else if (key == "metrics_filename") {
      cfg.metrics_filename = get_string(value, key);
    } else if (key == "checkpoint_cadence") {
      cfg.checkpoint_cadence = get_uint(value, key);
    } else if (key == "disable_frugality") {
      cfg.disable_frugality = get_bool(value, key);
    } else if (key == "disable_plasticity") {
      cfg.disable_plasticity = get_bool(value, key);
    } else if (key == "disable_sensitivity") {
      cfg.disable_sensitivity = get_bool(value, key);
    } else {
      throw ConfigError("unknown config key \"" + key + "\"");
    }
  }

  // Classification defaults to relu, regression to tanh; explicit wins.
  if (!activation_given)
    t.activation = t.task == "cluster" ? Activation::kRelu : Activation::kTanh;

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

std::string echo_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json doc;
  doc["algorithm"] = t.algorithm == Algorithm::kNeuronml ? "neuronml" : "maml";
  doc["seed"] = t.seed;
  doc["task"] = t.task;
  doc["k_shot"] = t.taskgen.k_shot;
  doc["query_count"] = t.taskgen.query_count;
  doc["input_dim"] = t.taskgen.input_dim;
  doc["n_way"] = t.taskgen.n_way;
  doc["amplitude_min"] = t.taskgen.amplitude_min;
  doc["amplitude_max"] = t.taskgen.amplitude_max;
  doc["frequency_min"] = t.taskgen.frequency_min;
  doc["frequency_max"] = t.taskgen.frequency_max;
  doc["phase_min"] = t.taskgen.phase_min;
  doc["phase_max"] = t.taskgen.phase_max;
  doc["noise_sigma"] = t.taskgen.noise_sigma;
  doc["separation"] = t.taskgen.separation;
  doc["ssl_blocks"] = t.taskgen.ssl_blocks;
  doc["ssl_views"] = t.taskgen.ssl_views;
  doc["ssl_noise"] = t.taskgen.ssl_noise;
  doc["ssl_scaling"] = t.taskgen.ssl_scaling;
  doc["hidden_units"] = t.hidden_units;
  doc["activation"] = to_string(t.activation);
  doc["granularity"] =
      t.granularity == MaskGranularity::kPerUnit ? "per_unit" : "per_parameter";
  doc["initial_mask_logit"] = t.initial_mask_logit;
  doc["iterations"] = t.iterations;
  doc["meta_batch"] = t.meta_batch;
  doc["inner_steps"] = t.inner_steps;
  doc["inner_lr"] = t.inner_lr;
  doc["outer_lr"] = t.outer_lr;
  doc["mask_lr"] = t.mask_lr;
  doc["optimizer"] = t.optimizer == Optimizer::kSgd ? "sgd" : "adam";
  doc["meta_grad"] =
      t.meta_grad == MetaGradMode::kFirstOrder ? "first_order" : "exact_fd";
  doc["frugality_weight"] = t.structure.frugality_weight;
  doc["plasticity_weight"] = t.structure.plasticity_weight;
  doc["sensitivity_weight"] = t.structure.sensitivity_weight;
  doc["budget_const"] = t.structure.budget_const;
  doc["budget_scale"] = t.structure.budget_scale;
  doc["hinge_weight"] = t.structure.hinge_weight;
  doc["sensitivity_floor"] = t.structure.sensitivity_floor;
  doc["activation_threshold"] = t.activation_threshold;
  doc["hebbian_decay"] = t.hebbian_decay;
  doc["hebbian_temperature"] = t.hebbian_temperature;
  doc["eval_tasks"] = t.eval_tasks;
  doc["eval_adapt_steps"] = t.eval_adapt_steps;
  doc["eval_cadence"] = t.eval_cadence;
  doc["eval_seed"] = t.eval_seed;
  doc["output_dir"] = cfg.output_dir;
  doc["metrics_filename"] = cfg.metrics_filename;
  doc["checkpoint_cadence"] = cfg.checkpoint_cadence;
  doc["disable_frugality"] = cfg.disable_frugality;
  doc["disable_plasticity"] = cfg.disable_plasticity;
  doc["disable_sensitivity"] = cfg.disable_sensitivity;
  return doc.dump(2) + "\n";
}

}  // namespace neuronml
