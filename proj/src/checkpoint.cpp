#include "neuronml/checkpoint.hpp"

#include <filesystem>

#include <json.hpp>

#include "neuronml/errors.hpp"
#include "neuronml/fsutil.hpp"

namespace neuronml {

namespace {

using nlohmann::json;

json layer_to_json(const Layer& l) {
  return json{{"in", l.in},
              {"out", l.out},
              {"activation", to_string(l.act)},
              {"weights", l.weights},
              {"biases", l.biases}};
}

Layer layer_from_json(const json& j) {
  Layer l;
  l.in = j.at("in").get<std::size_t>();
  l.out = j.at("out").get<std::size_t>();
  l.act = activation_from_string(j.at("activation").get<std::string>());
  l.weights = j.at("weights").get<std::vector<double>>();
  l.biases = j.at("biases").get<std::vector<double>>();
  if (l.weights.size() != l.in * l.out || l.biases.size() != l.out)
    throw CheckpointError("checkpoint: layer shape does not match its arrays");
  return l;
}

}  // namespace

void save_checkpoint(const std::string& path, const MetaState& state,
                     const RunConfig& cfg) {
  json doc;
  doc["format"] = "neuronml-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["iteration"] = state.iteration;

  json layers = json::array();
  for (const Layer& l : state.net.layers) layers.push_back(layer_to_json(l));
  doc["layers"] = std::move(layers);

  doc["mask_logits"] = state.mask.logits;
  doc["mask_threshold"] = state.mask.activation_threshold;
  doc["mask_granularity"] = state.mask.granularity == MaskGranularity::kPerUnit
                                ? "per_unit"
                                : "per_parameter";
  doc["tracker_importance"] = state.tracker.importance;
  doc["tracker_decay"] = state.tracker.decay;
  doc["tracker_temperature"] = state.tracker.temperature;
  doc["config"] = nlohmann::json::parse(echo_config(cfg));
  atomic_write(path, doc.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw CheckpointError("checkpoint not found: " + path);
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint unreadable: " + path + ": " + e.what());
  }
  try {
    if (doc.value("format", "") != "neuronml-checkpoint")
      throw CheckpointError("not a checkpoint file: " + path);
    if (doc.at("version").get<int>() != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version in " + path);

    LoadedCheckpoint loaded;
    loaded.config = parse_run_config(doc.at("config").dump());
    loaded.state.iteration = doc.at("iteration").get<std::uint64_t>();
    for (const auto& jl : doc.at("layers"))
      loaded.state.net.layers.push_back(layer_from_json(jl));
    if (loaded.state.net.layers.empty())
      throw CheckpointError("checkpoint has no layers: " + path);

    loaded.state.mask.logits = doc.at("mask_logits").get<std::vector<double>>();
    loaded.state.mask.activation_threshold = doc.at("mask_threshold").get<double>();
    loaded.state.mask.granularity =
        doc.at("mask_granularity").get<std::string>() == "per_unit"
            ? MaskGranularity::kPerUnit
            : MaskGranularity::kPerParameter;
    if (loaded.state.mask.logits.size() !=
        loaded.state.net.mask_size(loaded.state.mask.granularity))
      throw CheckpointError("checkpoint mask does not match its network: " + path);

    loaded.state.tracker.importance =
        doc.at("tracker_importance").get<std::vector<double>>();
    loaded.state.tracker.decay = doc.at("tracker_decay").get<double>();
    loaded.state.tracker.temperature = doc.at("tracker_temperature").get<double>();
    if (loaded.state.tracker.importance.size() != loaded.state.mask.logits.size())
      throw CheckpointError("checkpoint tracker does not match its mask: " + path);
    return loaded;
  } catch (const CheckpointError&) {
    throw;
  } catch (const ConfigError& e) {
    throw CheckpointError("checkpoint config invalid: " + std::string(e.what()));
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint malformed: " + path + ": " + e.what());
  }
}

}  // namespace neuronml
