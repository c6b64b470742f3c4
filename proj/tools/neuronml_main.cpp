// Command-line surface for the meta-learning laboratory.
//
// Subcommands:
//   train      run a config, writing metrics, checkpoints, and a summary
//   eval       adapt a checkpoint to fresh held-out tasks and score it
//   ablate     run a config twice (full vs one structure term off), same seeds
//   gradcheck  compare analytic gradients against central differences
//   select     rank fitted candidates by penalized evidence
//
// Exit codes: 0 success, 1 failed gradient check, 2 config or precondition
// error, 3 divergence (partial metrics are still flushed), 4 checkpoint error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuronml/checkpoint.hpp"
#include "neuronml/config.hpp"
#include "neuronml/errors.hpp"
#include "neuronml/fsutil.hpp"
#include "neuronml/meta.hpp"
#include "neuronml/metrics.hpp"
#include "neuronml/rng.hpp"
#include "neuronml/selection.hpp"
#include "neuronml/svgplot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neuronml;

namespace {

json eval_to_json(const EvalSummary& s) {
  return json{{"metric", s.metric},
              {"metric_mean", s.metric_mean},
              {"metric_std", s.metric_std},
              {"mask_density", s.mask_density},
              {"hard_overlap", s.hard_overlap},
              {"task_count", s.task_count}};
}

// Train one configuration into `dir`: metrics CSV, periodic + final
// checkpoints, summary JSON, optional SVG chart.  Shared by train and the
// two ablation arms.  Returns the result so callers can compare arms.
TrainResult run_one_training(const RunConfig& cfg, const fs::path& dir, bool plot) {
  fs::create_directories(dir);
  const fs::path metrics_path = dir / cfg.metrics_filename;

  const IterationCallback periodic = [&](const MetaState& st) {
    if (st.iteration > 0 && st.iteration % cfg.checkpoint_cadence == 0 &&
        st.iteration < cfg.train.iterations) {
      save_checkpoint((dir / ("checkpoint_" + std::to_string(st.iteration) + ".json"))
                          .string(),
                      st, cfg);
    }
  };

  TrainResult result;
  try {
    result = train(cfg.effective_train(), {}, periodic);
  } catch (const TrainingDiverged& diverged) {
    // Flush what completed so the run can still be inspected.
    atomic_write(metrics_path.string(), metrics_to_csv(diverged.partial_metrics()));
    throw;
  }

  atomic_write(metrics_path.string(), metrics_to_csv(result.metrics));
  save_checkpoint((dir / "checkpoint.json").string(), result.state, cfg);

  json summary;
  summary["format"] = "neuronml-summary";
  summary["version"] = 1;
  summary["config"] = json::parse(echo_config(cfg));
  summary["iterations_completed"] = result.state.iteration;
  summary["task_checksum"] = result.task_checksum;
  summary["wall_ms"] = result.wall_ms;
  summary["final_eval"] = eval_to_json(result.final_eval);
  json history = json::array();
  for (const auto& [iter, ev] : result.eval_history) {
    json entry = eval_to_json(ev);
    entry["iteration"] = iter;
    history.push_back(std::move(entry));
  }
  summary["eval_history"] = std::move(history);
  atomic_write((dir / "summary.json").string(), summary.dump(2) + "\n");

  if (plot)
    atomic_write((dir / "metrics.svg").string(),
                 render_metrics_svg(result.metrics, dir.filename().string()));
  return result;
}

int cmd_train(const std::string& config_path, bool seed_given, std::uint64_t seed,
              const std::string& out_dir, bool plot) {
  RunConfig cfg = load_run_config(config_path);  // throws before any file exists
  if (seed_given) cfg.train.seed = seed;
  if (!out_dir.empty()) cfg.output_dir = out_dir;

  const TrainResult result = run_one_training(cfg, cfg.output_dir, plot);
  std::printf("train: %llu iterations, final %s %.6g +/- %.6g, mask density %.4f\n",
              (unsigned long long)result.state.iteration,
              result.final_eval.metric.c_str(), result.final_eval.metric_mean,
              result.final_eval.metric_std, result.final_eval.mask_density);
  std::printf("train: artifacts in %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, bool seed_given, std::uint64_t seed,
             long long adapt_steps, long long task_count, const std::string& out_dir) {
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  TrainConfig t = loaded.config.effective_train();
  if (seed_given) t.eval_seed = seed;
  if (adapt_steps >= 0) t.eval_adapt_steps = std::size_t(adapt_steps);
  if (task_count > 0) t.eval_tasks = std::size_t(task_count);

  const std::vector<Task> tasks = make_eval_tasks(t, t.eval_tasks);
  const EvalSummary summary = evaluate(loaded.state, tasks, t.eval_adapt_steps, t);

  json doc = eval_to_json(summary);
  doc["checkpoint"] = checkpoint_path;
  doc["checkpoint_iteration"] = loaded.state.iteration;
  doc["adapt_steps"] = t.eval_adapt_steps;
  doc["eval_seed"] = t.effective_eval_seed();

  const fs::path dir =
      out_dir.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  atomic_write((dir / "eval_summary.json").string(), doc.dump(2) + "\n");

  std::printf("%s\n", doc.dump(2).c_str());
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& disable,
               bool seed_given, std::uint64_t seed, const std::string& out_dir,
               bool plot) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_given) cfg.train.seed = seed;
  if (!out_dir.empty()) cfg.output_dir = out_dir;

  RunConfig ablated = cfg;
  if (disable == "fr")
    ablated.train.structure.frugality_weight = 0.0;
  else if (disable == "pl")
    ablated.train.structure.plasticity_weight = 0.0;
  else if (disable == "se")
    ablated.train.structure.sensitivity_weight = 0.0;
  else
    throw ConfigError("--disable: expected one of fr, pl, se");

  const fs::path base = cfg.output_dir;
  const TrainResult full = run_one_training(cfg, base / "full", plot);
  const TrainResult part = run_one_training(ablated, base / "ablated", plot);

  json delta;
  delta["format"] = "neuronml-ablation";
  delta["disabled"] = disable;
  delta["task_checksum_full"] = full.task_checksum;
  delta["task_checksum_ablated"] = part.task_checksum;
  delta["task_checksums_match"] = full.task_checksum == part.task_checksum;
  delta["metric"] = full.final_eval.metric;
  delta["full"] = eval_to_json(full.final_eval);
  delta["ablated"] = eval_to_json(part.final_eval);
  delta["metric_delta"] = full.final_eval.metric_mean - part.final_eval.metric_mean;
  atomic_write((base / "delta.json").string(), delta.dump(2) + "\n");

  std::printf("ablate(%s): full %s %.6g vs ablated %.6g (delta %.6g)\n",
              disable.c_str(), full.final_eval.metric.c_str(),
              full.final_eval.metric_mean, part.final_eval.metric_mean,
              full.final_eval.metric_mean - part.final_eval.metric_mean);
  std::printf("ablate: task checksums %s\n",
              full.task_checksum == part.task_checksum ? "match" : "DIFFER");
  return 0;
}

// Max relative error between analytic and central-difference gradients,
// probing one scalar at a time through `value` with `set`.  `at` is taken
// by value: it must stay the unperturbed baseline while `set` mutates the
// live parameters.
template <typename SetFn, typename ValueFn>
double fd_max_rel_error(std::size_t count, double step, const std::vector<double>& analytic,
                        const std::vector<double> at, SetFn&& set, ValueFn&& value) {
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    set(i, at[i] + step);
    const double up = value();
    set(i, at[i] - step);
    const double dn = value();
    set(i, at[i]);
    const double numeric = (up - dn) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - numeric) /
                                (std::abs(analytic[i]) + std::abs(numeric) + 1e-12));
  }
  return worst;
}

int cmd_gradcheck(const std::string& config_path, bool seed_given, std::uint64_t seed,
                  bool corrupt) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (seed_given) cfg.train.seed = seed;
  TrainConfig t = cfg.effective_train();
  t.validate();

  MetaState state = MetaState::init(t);
  if (state.net.param_count() > 10000)
    throw ConfigError("gradcheck: network exceeds 10000 parameters");

  const std::vector<Task> batch = sample_task_batch(t, 0, {});
  const Task& task = batch.front();
  const LossKind kind = t.loss_kind();
  const MaskGranularity g = t.granularity;
  const double step = 1e-5;

  // --- weight-loss gradients (w.r.t. weights and w.r.t. mask logits) ---
  Network net = state.net;
  std::vector<double> logits = state.mask.logits;
  LossGrads lg = loss_and_grads(net, logits, task.support_inputs, task.support_targets,
                                kind, g);
  if (corrupt) {
    lg.grads.weight_grads[0][0] += 1e-3;
    if (!lg.grads.mask_logit_grads.empty()) lg.grads.mask_logit_grads[0] += 1e-3;
  }

  std::vector<double> flat = net.flatten();
  std::vector<double> flat_grads;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    flat_grads.insert(flat_grads.end(), lg.grads.weight_grads[l].begin(),
                      lg.grads.weight_grads[l].end());
    flat_grads.insert(flat_grads.end(), lg.grads.bias_grads[l].begin(),
                      lg.grads.bias_grads[l].end());
  }
  const double err_weights = fd_max_rel_error(
      flat.size(), step, flat_grads, flat,
      [&](std::size_t i, double v) {
        flat[i] = v;
        net.unflatten(flat);
      },
      [&] {
        return loss_value(net, logits, task.support_inputs, task.support_targets, kind, g);
      });

  const double err_mask_weight_loss = fd_max_rel_error(
      logits.size(), step, lg.grads.mask_logit_grads, logits,
      [&](std::size_t i, double v) { logits[i] = v; },
      [&] {
        return loss_value(net, logits, task.support_inputs, task.support_targets, kind, g);
      });

  // --- structure-loss gradients w.r.t. mask logits ---
  // Scores and batch-mate masks are data here, exactly as during training.
  const std::vector<double> scores = sensitivity_scores(
      net, logits, task.support_inputs, task.support_targets, kind, g);
  std::mt19937_64 rng = make_stream(t.seed, 0x6C);
  std::uniform_real_distribution<double> u01(0.05, 0.95);
  std::vector<std::vector<double>> others(2, std::vector<double>(logits.size()));
  for (auto& o : others)
    for (double& p : o) p = u01(rng);
  HebbianTracker tracker = state.tracker;
  for (double& v : tracker.importance) v = u01(rng);

  const double d = double(owned_param_count(net, g));
  const double n_samples =
      double(task.support_inputs.rows() + task.query_inputs.rows());
  std::vector<double> sg = structure_logit_grads(net, logits, others, tracker, scores,
                                                 t.structure, d, n_samples, g);
  if (corrupt && !sg.empty()) sg[0] += 1e-3;

  const double err_mask_structure = fd_max_rel_error(
      logits.size(), 1e-6, sg, logits,
      [&](std::size_t i, double v) { logits[i] = v; },
      [&] {
        return structure_loss(net, sigmoid(logits), others, tracker, scores,
                              t.structure, d, n_samples, t.activation_threshold, g)
            .total;
      });

  const double tol = 1e-5;
  std::printf("gradcheck: weight gradients            max rel err %.3e\n", err_weights);
  std::printf("gradcheck: mask gradients (weight loss) max rel err %.3e\n",
              err_mask_weight_loss);
  std::printf("gradcheck: mask gradients (structure)   max rel err %.3e\n",
              err_mask_structure);
  const bool ok =
      err_weights < tol && err_mask_weight_loss < tol && err_mask_structure < tol;
  std::printf("gradcheck: %s (tolerance %.0e)\n", ok ? "PASS" : "FAIL", tol);
  return ok ? 0 : 1;
}

int cmd_select(const std::string& candidates_path, double n_samples) {
  json doc;
  try {
    doc = json::parse(read_file(candidates_path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("candidates file: ") + e.what());
  }
  const json list = doc.is_array() ? doc : doc.value("candidates", json::array());
  std::vector<CandidateModel> candidates;
  for (const auto& c : list) {
    CandidateModel m;
    m.label = c.value("label", "candidate_" + std::to_string(candidates.size()));
    if (!c.contains("log_likelihood") || !c.contains("free_params"))
      throw ConfigError("candidates file: each entry needs log_likelihood and free_params");
    m.log_likelihood = c.at("log_likelihood").get<double>();
    m.free_params = c.at("free_params").get<std::size_t>();
    candidates.push_back(std::move(m));
  }
  if (candidates.size() < 2)
    throw ConfigError("select: need at least two candidates");
  if (!(n_samples >= 1.0)) throw ConfigError("select: --n must be at least 1");

  const SelectionResult r = select_model(candidates, n_samples);

  std::size_t label_w = 5;
  for (const CandidateModel& c : candidates)
    label_w = std::max(label_w, c.label.size());
  std::printf("  %-*s %6s %14s %10s\n", int(label_w), "model", "K", "log_evidence",
              "posterior");
  for (std::size_t i = 0; i < candidates.size(); ++i)
    std::printf("%s %-*s %6zu %14.4f %10.6f\n", i == r.best_index ? "*" : " ",
                int(label_w), candidates[i].label.c_str(), candidates[i].free_params,
                r.evidence[i], r.posterior[i]);

  json out;
  out["n_samples"] = n_samples;
  out["best_index"] = r.best_index;
  out["best_label"] = candidates[r.best_index].label;
  json rows = json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i)
    rows.push_back(json{{"label", candidates[i].label},
                        {"free_params", candidates[i].free_params},
                        {"log_likelihood", candidates[i].log_likelihood},
                        {"log_evidence", r.evidence[i]},
                        {"posterior", r.posterior[i]},
                        {"selected", i == r.best_index}});
  out["candidates"] = std::move(rows);
  std::printf("%s\n", out.dump().c_str());  // one line, machine-readable
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning laboratory: masked networks, structure losses, "
               "model selection"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, candidates_path, out_dir, disable;
  std::uint64_t seed = 0;
  bool plot = false, corrupt = false;
  long long adapt_steps = -1, task_count = -1;
  double n_samples = 0.0;

  CLI::App* train_cmd = app.add_subcommand("train", "Run a training config");
  train_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  CLI::Option* train_seed = train_cmd->add_option("--seed", seed, "Seed override");
  train_cmd->add_option("--out", out_dir, "Output directory override");
  train_cmd->add_flag("--plot", plot, "Also write an SVG chart of the metrics");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on fresh tasks");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  CLI::Option* eval_seed = eval_cmd->add_option("--seed", seed, "Evaluation seed override");
  eval_cmd->add_option("--adapt-steps", adapt_steps, "Adaptation steps per task");
  eval_cmd->add_option("--tasks", task_count, "Number of held-out tasks");
  eval_cmd->add_option("--out", out_dir, "Directory for eval_summary.json");

  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Run full vs one-term-off with shared seeds");
  ablate_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  ablate_cmd->add_option("--disable", disable, "Structure term to turn off: fr|pl|se")
      ->required();
  CLI::Option* ablate_seed = ablate_cmd->add_option("--seed", seed, "Seed override");
  ablate_cmd->add_option("--out", out_dir, "Output directory override");
  ablate_cmd->add_flag("--plot", plot, "Also write SVG charts per arm");

  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad_cmd->add_option("--config", config_path, "Config file (defaults when omitted)");
  CLI::Option* grad_seed = grad_cmd->add_option("--seed", seed, "Seed override");
  grad_cmd->add_flag("--corrupt-gradients", corrupt, "Negative control (testing)")
      ->group("");  // hidden

  CLI::App* select_cmd =
      app.add_subcommand("select", "Rank candidates by penalized evidence");
  select_cmd->add_option("--candidates", candidates_path, "Candidates file (JSON)")
      ->required();
  select_cmd->add_option("--n", n_samples, "Sample count behind the likelihoods")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad flags are config errors in this tool's vocabulary
  }

  try {
    if (train_cmd->parsed())
      return cmd_train(config_path, !train_seed->empty(), seed, out_dir, plot);
    if (eval_cmd->parsed())
      return cmd_eval(checkpoint_path, !eval_seed->empty(), seed, adapt_steps,
                      task_count, out_dir);
    if (ablate_cmd->parsed())
      return cmd_ablate(config_path, disable, !ablate_seed->empty(), seed, out_dir,
                        plot);
    if (grad_cmd->parsed())
      return cmd_gradcheck(config_path, !grad_seed->empty(), seed, corrupt);
    if (select_cmd->parsed()) return cmd_select(candidates_path, n_samples);
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "error: training diverged: %s\n", e.what());
    return 3;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
