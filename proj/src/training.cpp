#include "meshflow/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "meshflow/error.hpp"
#include "meshflow/io.hpp"
#include "meshflow/optim.hpp"

namespace meshflow {
namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// handled exactly once, so results written by index do not depend on the
// thread count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct PairPass {
  double loss = 0.0;
  GradientMap grads;
};

std::vector<TrainingPair> collect_pairs(const std::vector<Scenario>& scenarios, std::size_t window) {
  std::vector<TrainingPair> pairs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const Scenario& sc = scenarios[s];
    if (!sc.enabled) continue;
    if (!sc.graph) throw DataError("scenario '" + sc.name + "' has no graph");
    if (sc.series.nodes() != sc.graph->num_nodes()) {
      throw DataError("scenario '" + sc.name + "': series has " + std::to_string(sc.series.nodes()) +
                      " nodes, mesh has " + std::to_string(sc.graph->num_nodes()));
    }
    auto windows = make_windows(sc.series, window, sc.begin, sc.end, s);
    pairs.insert(pairs.end(), std::make_move_iterator(windows.begin()), std::make_move_iterator(windows.end()));
  }
  if (pairs.empty()) throw DataError("no enabled training scenario");
  return pairs;
}

std::mt19937_64 noise_rng(std::uint64_t seed, std::size_t scenario, std::size_t epoch, std::size_t t) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(scenario), static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(t)};
  return std::mt19937_64(seq);
}

[[noreturn]] void non_finite(const Scenario& sc, const TrainingPair& pair, std::size_t epoch) {
  throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", scenario '" + sc.name +
                     "', window ending at snapshot " + std::to_string(pair.t));
}

struct Snapshot {
  std::vector<Matrix> value, m, v;
  std::vector<std::int64_t> step;

  void take(const std::vector<Parameter*>& params) {
    value.clear(), m.clear(), v.clear(), step.clear();
    for (const Parameter* p : params) {
      value.push_back(p->value());
      m.push_back(p->first_moment());
      v.push_back(p->second_moment());
      step.push_back(p->step());
    }
  }
  void restore(const std::vector<Parameter*>& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->value() = value[i];
      params[i]->first_moment() = m[i];
      params[i]->second_moment() = v[i];
      params[i]->set_step(step[i]);
    }
  }
};

double summed_loss(GraphUNet& model, const std::vector<Scenario>& scenarios, const std::vector<TrainingPair>& pairs,
                   std::size_t workers, std::size_t epoch) {
  std::vector<double> losses(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    const TrainingPair& pair = pairs[i];
    Tape tape(false);
    const Var pred = model.forward(tape, *scenarios[pair.scenario].graph, tape.constant(pair.window));
    losses[i] = ad::mse(pred, tape.constant(pair.target)).value()(0, 0);
  });
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!std::isfinite(losses[i])) non_finite(scenarios[pairs[i].scenario], pairs[i], epoch);
    total += losses[i];
  }
  return total;
}

}  // namespace

std::string to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::none:
      return "none";
    case NoiseMode::input:
      return "input";
    case NoiseMode::input_output:
      return "input_output";
  }
  return "none";
}

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "none") return NoiseMode::none;
  if (s == "input" || s == "i") return NoiseMode::input;
  if (s == "input_output" || s == "io") return NoiseMode::input_output;
  throw DataError("unknown noise mode '" + s + "' (expected none, input or input_output)");
}

std::vector<TrainingPair> make_windows(const SnapshotSeries& series, std::size_t window, std::size_t begin,
                                       std::size_t end, std::size_t scenario) {
  if (window == 0) throw DataError("window must be positive");
  if (end > series.steps() || begin > end) {
    throw DataError("training range [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") exceeds series of " + std::to_string(series.steps()) + " snapshots");
  }
  if (end - begin < window + 1) {
    throw DataError("training range of " + std::to_string(end - begin) + " snapshots is shorter than window + 1 = " +
                    std::to_string(window + 1));
  }
  std::vector<TrainingPair> pairs;
  pairs.reserve(end - begin - window);
  for (std::size_t t = begin + window - 1; t + 1 < end; ++t) {
    TrainingPair p;
    p.scenario = scenario;
    p.t = t;
    p.window = series.fields.middleRows(static_cast<Eigen::Index>(t + 1 - window), static_cast<Eigen::Index>(window))
                   .transpose();
    p.target = series.fields.row(static_cast<Eigen::Index>(t + 1)).transpose();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

TrainingPair inject_noise(const TrainingPair& pair, NoiseMode mode, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw DataError("noise sigma must be non-negative");
  TrainingPair out = pair;
  if (mode == NoiseMode::none || sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index i = 0; i < out.window.size(); ++i) out.window.data()[i] += normal(rng);
  if (mode == NoiseMode::input_output) {
    for (Eigen::Index i = 0; i < out.target.size(); ++i) out.target.data()[i] += normal(rng);
  }
  return out;
}

PlateauSchedule::PlateauSchedule(double lr0, double factor, std::size_t patience, double min_lr)
    : lr_(lr0), factor_(factor), patience_(patience), min_lr_(min_lr), best_(std::numeric_limits<double>::infinity()) {
  if (!(lr0 > 0.0) || !(factor > 0.0 && factor < 1.0) || min_lr < 0.0) {
    throw DataError("invalid learning rate schedule");
  }
}

double PlateauSchedule::update(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ > patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_epochs_ = 0;
  }
  return lr_;
}

void TrainConfig::validate() const {
  if (window == 0) throw DataError("train.window must be positive");
  if (epochs == 0) throw DataError("train.epochs must be positive");
  if (!(noise_sigma >= 0.0)) throw DataError("train.noise_sigma must be non-negative");
  PlateauSchedule(lr0, lr_factor, lr_patience, lr_min);
}

void train_config_to_keys(const TrainConfig& c, KeyValues& kv) {
  kv.set("train.window", std::to_string(c.window));
  kv.set("train.epochs", std::to_string(c.epochs));
  kv.set("train.lr0", format_double(c.lr0));
  kv.set("train.lr_factor", format_double(c.lr_factor));
  kv.set("train.lr_patience", std::to_string(c.lr_patience));
  kv.set("train.lr_min", format_double(c.lr_min));
  kv.set("train.noise", to_string(c.noise));
  kv.set("train.noise_sigma", format_double(c.noise_sigma));
  kv.set("train.early_stop_patience", std::to_string(c.early_stop_patience));
  kv.set("train.seed", std::to_string(c.seed));
}

TrainConfig train_config_from_keys(const KeyValues& kv, TrainConfig c) {
  c.window = kv.get_size("train.window", c.window);
  c.epochs = kv.get_size("train.epochs", c.epochs);
  c.lr0 = kv.get_double("train.lr0", c.lr0);
  c.lr_factor = kv.get_double("train.lr_factor", c.lr_factor);
  c.lr_patience = kv.get_size("train.lr_patience", c.lr_patience);
  c.lr_min = kv.get_double("train.lr_min", c.lr_min);
  if (auto v = kv.get("train.noise")) c.noise = parse_noise_mode(*v);
  c.noise_sigma = kv.get_double("train.noise_sigma", c.noise_sigma);
  c.early_stop_patience = kv.get_size("train.early_stop_patience", c.early_stop_patience);
  c.seed = kv.get_u64("train.seed", c.seed);
  c.validate();
  return c;
}

double evaluate_loss(GraphUNet& model, const std::vector<Scenario>& scenarios, std::size_t window) {
  return summed_loss(model, scenarios, collect_pairs(scenarios, window), 1, 0);
}

TrainResult train(GraphUNet& model, const std::vector<Scenario>& scenarios, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  if (model.config().window() != config.window) {
    throw DataError("model expects a window of " + std::to_string(model.config().window()) +
                    " snapshots, training uses " + std::to_string(config.window));
  }
  const std::vector<TrainingPair> pairs = collect_pairs(scenarios, config.window);
  const std::vector<Parameter*>& params = model.parameters();
  for (Parameter* p : params) p->zero_grad();

  const bool noisy = config.noise != NoiseMode::none && config.noise_sigma > 0.0;
  PlateauSchedule schedule(config.lr0, config.lr_factor, config.lr_patience, config.lr_min);
  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  Snapshot best;
  std::vector<PairPass> passes(pairs.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    parallel_for(pairs.size(), config.workers, [&](std::size_t i) {
      const TrainingPair& clean = pairs[i];
      Tape tape;
      Var window, target;
      if (noisy) {
        auto rng = noise_rng(config.seed, clean.scenario, epoch, clean.t);
        TrainingPair pair = inject_noise(clean, config.noise, config.noise_sigma, rng);
        window = tape.constant(std::move(pair.window));
        target = tape.constant(std::move(pair.target));
      } else {
        window = tape.constant(clean.window);
        target = tape.constant(clean.target);
      }
      const Var loss = ad::mse(model.forward(tape, *scenarios[clean.scenario].graph, window), target);
      passes[i].loss = loss.value()(0, 0);
      passes[i].grads = tape.gradients(loss);
    });

    // Fixed pair order keeps the sums independent of the worker count.
    double train_loss = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!std::isfinite(passes[i].loss)) non_finite(scenarios[pairs[i].scenario], pairs[i], epoch);
      train_loss += passes[i].loss;
      const GradientMap& g = passes[i].grads;
      for (std::size_t k = 0; k < g.params.size(); ++k) g.params[k]->grad() += g.grads[k];
      passes[i].grads = {};
    }
    const double clean_loss = noisy ? summed_loss(model, scenarios, pairs, config.workers, epoch) : train_loss;

    EpochRecord record{epoch, clean_loss, schedule.lr(), result.best_loss};
    if (clean_loss < result.best_loss) {
      result.best_loss = clean_loss;
      result.best_epoch = epoch;
      record.best = clean_loss;
      best.take(params);
      if (hooks.on_improve) hooks.on_improve(model, record);
    }
    result.trace.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);

    adam_step(params, AdamOptions{.lr = schedule.lr()});
    schedule.update(clean_loss);

    if (config.early_stop_patience > 0 && epoch - result.best_epoch >= config.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  best.restore(params);
  return result;
}

void write_loss_trace(std::ostream& os, const std::vector<EpochRecord>& trace) {
  os << "epoch,loss,lr,best\n";
  for (const EpochRecord& r : trace) {
    os << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.lr) << ',' << format_double(r.best)
       << '\n';
  }
}

}  // namespace meshflow
