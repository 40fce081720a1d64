#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "meshflow/config.hpp"
#include "meshflow/graph.hpp"
#include "meshflow/unet.hpp"

namespace meshflow {

enum class NoiseMode { none, input, input_output };

std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& s);

/// One training mesh with its series and the snapshot range [begin, end)
/// used for training.
struct Scenario {
  std::string name;
  std::shared_ptr<const Graph> graph;
  SnapshotSeries series;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool enabled = true;
};

struct TrainingPair {
  std::size_t scenario = 0;
  std::size_t t = 0;  // index of the newest snapshot in the window
  Matrix window;      // N x W, oldest first
  Matrix target;      // N x 1, snapshot t + 1
};

/// One pair per t with t - W + 1 >= begin and t + 1 < end, so
/// (end - begin) - W pairs. Throws DataError when the range is too short.
std::vector<TrainingPair> make_windows(const SnapshotSeries& series, std::size_t window, std::size_t begin,
                                       std::size_t end, std::size_t scenario = 0);

/// Copy of `pair` with i.i.d. N(0, sigma^2) added to the window (input) and
/// also to the target (input_output).
TrainingPair inject_noise(const TrainingPair& pair, NoiseMode mode, double sigma, std::mt19937_64& rng);

/// Reduce-on-plateau: after more than `patience` epochs without a strictly
/// lower loss the rate is multiplied by `factor`, never going below `min_lr`.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr0, double factor, std::size_t patience, double min_lr);

  /// Feeds one epoch loss; returns the rate for the next step.
  double update(double loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double min_lr_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

struct TrainConfig {
  std::size_t window = 20;
  std::size_t epochs = 7500;
  double lr0 = 1e-3;
  double lr_factor = 0.5;
  std::size_t lr_patience = 500;
  double lr_min = 1e-5;
  NoiseMode noise = NoiseMode::none;
  double noise_sigma = 0.0;
  /// Epochs without a lower clean loss before stopping; 0 disables.
  std::size_t early_stop_patience = 1500;
  std::uint64_t seed = 0;
  /// Threads for the per-pair passes; results do not depend on it.
  std::size_t workers = 1;

  void validate() const;
};

/// Writes/reads the "train.*" keys.
void train_config_to_keys(const TrainConfig& config, KeyValues& kv);
TrainConfig train_config_from_keys(const KeyValues& kv, TrainConfig base = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // clean summed loss at the start of the epoch
  double lr = 0.0;    // rate used for this epoch's step
  double best = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

struct TrainHooks {
  /// Called with the model holding the new best parameters.
  std::function<void(const GraphUNet&, const EpochRecord&)> on_improve;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Full-batch training: every epoch sums the per-pair MSE over all pairs of
/// all enabled scenarios, takes one Adam step and leaves the model at the
/// best clean-loss parameters when done.
TrainResult train(GraphUNet& model, const std::vector<Scenario>& scenarios, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Clean summed loss over all pairs, without touching gradients.
double evaluate_loss(GraphUNet& model, const std::vector<Scenario>& scenarios, std::size_t window);

void write_loss_trace(std::ostream& os, const std::vector<EpochRecord>& trace);

}  // namespace meshflow
