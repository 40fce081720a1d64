#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "meshflow/config.hpp"
#include "meshflow/graph.hpp"
#include "meshflow/training.hpp"
#include "meshflow/unet.hpp"

namespace meshflow {

struct DataConfig {
  /// Directory holding <name>.mesh and <name>.series; empty generates the
  /// catalog scenarios in memory.
  std::string dir;
  std::vector<std::string> train{"baseline"};
  std::vector<std::string> eval{"baseline"};
  std::size_t train_steps = 150;
  std::size_t horizon = 100;
  /// Train only on nodes with x below this value (evaluation uses the full mesh).
  std::optional<double> truncate_x;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  /// Noise sigma as a fraction of the training-field standard deviation;
  /// replaces train.noise_sigma when set.
  std::optional<double> noise_sigma_rel;
  /// GMM kernel start from the training meshes' mean edge length.
  bool auto_edge_scale = true;
};

/// Reads model.*, train.* and data.* keys on top of the defaults. The model
/// window follows train.window when only the latter is given.
ExperimentConfig experiment_from_keys(const KeyValues& kv);
void experiment_to_keys(const ExperimentConfig& config, KeyValues& kv);

struct ScenarioData {
  std::string name;
  std::shared_ptr<const Graph> graph;
  SnapshotSeries series;
};

/// Loads from data.dir or generates `steps` snapshots from the catalog.
ScenarioData load_scenario(const DataConfig& data, const std::string& name, std::size_t steps);

struct RolloutScore {
  std::string scenario;
  double mse = 0.0;
};

struct ExperimentResult {
  TrainResult train;
  double noise_sigma = 0.0;  // sigma actually used
  std::vector<RolloutScore> rollout;
};

struct ExperimentOptions {
  std::size_t workers = 1;
  /// When set, writes config.txt, checkpoint.bin, loss.csv and summary.txt here.
  std::optional<std::filesystem::path> out;
};

/// Trains on data.train, then rolls out data.horizon steps past the training
/// range on every data.eval scenario.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

/// Rollout MSE over `horizon` steps starting at `start` with the model's window.
double evaluate_rollout(GraphUNet& model, const ScenarioData& data, std::size_t start, std::size_t horizon);

/// Standard deviation over the first `steps` snapshots of every series.
double field_std(const std::vector<ScenarioData>& data, std::size_t steps);

}  // namespace meshflow
