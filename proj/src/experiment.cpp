#include "meshflow/experiment.hpp"

#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "meshflow/error.hpp"
#include "meshflow/io.hpp"
#include "meshflow/rollout.hpp"
#include "meshflow/synth.hpp"

namespace meshflow {
namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os << text;
}

}  // namespace

ExperimentConfig experiment_from_keys(const KeyValues& kv) {
  KeyValues known;
  experiment_to_keys(ExperimentConfig{}, known);
  for (const auto& [key, value] : kv.entries()) {
    if (!known.contains(key)) throw DataError("unknown configuration key '" + key + "'");
  }
  ExperimentConfig c;
  KeyValues model_kv = kv;
  c.auto_edge_scale = kv.get_string("model.edge_scale", "auto") == "auto";
  if (c.auto_edge_scale) model_kv.erase("model.edge_scale");
  c.model = model_config_from_keys(model_kv);
  c.train = train_config_from_keys(kv);
  const bool has_window = kv.contains("train.window");
  const bool has_channels = kv.contains("model.channels");
  if (has_window && !has_channels) {
    c.model.channels.front() = c.train.window;
  } else if (!has_window) {
    c.train.window = c.model.window();
  } else if (c.train.window != c.model.window()) {
    throw DataError("train.window=" + std::to_string(c.train.window) + " disagrees with model.channels[0]=" +
                    std::to_string(c.model.window()));
  }
  c.data.dir = kv.get_string("data.dir", c.data.dir);
  c.data.train = kv.get_list("data.train", c.data.train);
  c.data.eval = kv.get_list("data.eval", c.data.eval);
  c.data.train_steps = kv.get_size("data.train_steps", c.data.train_steps);
  c.data.horizon = kv.get_size("data.horizon", c.data.horizon);
  if (auto v = kv.get("data.truncate_x"); v && *v != "none" && !v->empty()) {
    c.data.truncate_x = kv.get_double("data.truncate_x", 0.0);
  }
  if (auto v = kv.get("train.noise_sigma_rel"); v && *v != "none" && !v->empty()) {
    c.noise_sigma_rel = kv.get_double("train.noise_sigma_rel", 0.0);
    if (*c.noise_sigma_rel < 0.0) throw DataError("train.noise_sigma_rel must be non-negative");
  }
  if (c.data.train.empty()) throw DataError("data.train lists no scenario");
  if (c.data.train_steps < c.train.window + 1) throw DataError("data.train_steps must exceed train.window");
  return c;
}

void experiment_to_keys(const ExperimentConfig& c, KeyValues& kv) {
  model_config_to_keys(c.model, kv);
  if (c.auto_edge_scale) kv.set("model.edge_scale", "auto");
  train_config_to_keys(c.train, kv);
  kv.set("train.noise_sigma_rel", c.noise_sigma_rel ? format_double(*c.noise_sigma_rel) : "none");
  kv.set("data.dir", c.data.dir);
  kv.set("data.train", join(c.data.train));
  kv.set("data.eval", join(c.data.eval));
  kv.set("data.train_steps", std::to_string(c.data.train_steps));
  kv.set("data.horizon", std::to_string(c.data.horizon));
  kv.set("data.truncate_x", c.data.truncate_x ? format_double(*c.data.truncate_x) : "none");
}

ScenarioData load_scenario(const DataConfig& data, const std::string& name, std::size_t steps) {
  ScenarioData out;
  out.name = name;
  if (data.dir.empty()) {
    const ScenarioSpec spec = find_scenario(name);
    auto g = std::make_shared<const Graph>(generate_mesh(spec));
    out.series = generate_series(spec, *g, steps);
    out.graph = std::move(g);
    return out;
  }
  const std::filesystem::path dir(data.dir);
  out.graph = std::make_shared<const Graph>(load_mesh(dir / (name + ".mesh")));
  out.series = load_series(dir / (name + ".series"));
  out.series.validate(out.graph->num_nodes());
  if (out.series.steps() < steps) {
    throw DataError("series '" + name + "' has " + std::to_string(out.series.steps()) + " snapshots, " +
                    std::to_string(steps) + " needed");
  }
  return out;
}

double field_std(const std::vector<ScenarioData>& data, std::size_t steps) {
  double sum = 0.0, sum2 = 0.0, count = 0.0;
  for (const ScenarioData& d : data) {
    const auto block = d.series.fields.topRows(static_cast<Eigen::Index>(std::min(steps, d.series.steps())));
    sum += block.sum();
    sum2 += block.array().square().sum();
    count += static_cast<double>(block.size());
  }
  if (count == 0.0) return 0.0;
  const double mean = sum / count;
  return std::sqrt(std::max(sum2 / count - mean * mean, 0.0));
}

double evaluate_rollout(GraphUNet& model, const ScenarioData& data, std::size_t start, std::size_t horizon) {
  const std::size_t w = model.config().window();
  if (start + horizon > data.series.steps()) {
    throw DataError("scenario '" + data.name + "' is too short for a " + std::to_string(horizon) + "-step rollout");
  }
  const RolloutResult r = rollout(model, *data.graph, seed_window(data.series, start, w), horizon);
  return rollout_mse(r.predictions, data.series.fields.middleRows(static_cast<Eigen::Index>(start),
                                                                   static_cast<Eigen::Index>(horizon)));
}

ExperimentResult run_experiment(const ExperimentConfig& input, const ExperimentOptions& options) {
  ExperimentConfig config = input;
  const std::size_t steps = config.data.train_steps + config.data.horizon;

  std::vector<ScenarioData> train_data;
  for (const std::string& name : config.data.train) train_data.push_back(load_scenario(config.data, name, steps));

  std::vector<Scenario> scenarios;
  double edge_sum = 0.0;
  std::size_t edge_count = 0;
  for (const ScenarioData& d : train_data) {
    Scenario sc;
    sc.name = d.name;
    if (config.data.truncate_x) {
      const double limit = *config.data.truncate_x;
      auto [sub, map] = induced_subgraph(*d.graph, [limit](const Point2& p) { return p.x < limit; });
      sc.series = restrict_series(d.series, map);
      sc.graph = std::make_shared<const Graph>(std::move(sub));
    } else {
      sc.graph = d.graph;
      sc.series = d.series;
    }
    sc.begin = 0;
    sc.end = config.data.train_steps;
    for (double a : sc.graph->edge_attr()) edge_sum += a;
    edge_count += sc.graph->num_edges();
    scenarios.push_back(std::move(sc));
  }
  if (config.auto_edge_scale && edge_count > 0) config.model.edge_scale = edge_sum / static_cast<double>(edge_count);
  if (config.noise_sigma_rel) {
    config.train.noise_sigma = *config.noise_sigma_rel * field_std(train_data, config.data.train_steps);
  }
  config.train.workers = options.workers;

  GraphUNet model(config.model);
  spdlog::info("training {} scenario(s), {} parameters, sigma {}", scenarios.size(), model.parameters().size(),
               config.train.noise_sigma);

  std::filesystem::path checkpoint_path;
  if (options.out) {
    std::filesystem::create_directories(*options.out);
    KeyValues kv;
    experiment_to_keys(config, kv);
    kv.set("model.edge_scale", format_double(config.model.edge_scale));
    kv.set("train.noise_sigma", format_double(config.train.noise_sigma));
    kv.set("train.noise_sigma_rel", "none");
    std::ofstream os(*options.out / "config.txt");
    kv.write(os);
    checkpoint_path = *options.out / "checkpoint.bin";
  }

  TrainHooks hooks;
  if (options.out) hooks.on_improve = [&](const GraphUNet& m, const EpochRecord&) { save_model(checkpoint_path.string(), m); };
  hooks.on_epoch = [](const EpochRecord& r) {
    if (r.epoch % 100 == 0) spdlog::debug("epoch {} loss {} lr {} best {}", r.epoch, r.loss, r.lr, r.best);
  };

  ExperimentResult result;
  result.noise_sigma = config.train.noise_sigma;
  result.train = train(model, scenarios, config.train, hooks);
  spdlog::info("best loss {} at epoch {}", result.train.best_loss, result.train.best_epoch);

  for (const std::string& name : config.data.eval) {
    const ScenarioData* d = nullptr;
    for (const ScenarioData& t : train_data) {
      if (t.name == name) d = &t;
    }
    ScenarioData loaded;
    if (!d) {
      loaded = load_scenario(config.data, name, steps);
      d = &loaded;
    }
    const double mse = evaluate_rollout(model, *d, config.data.train_steps, config.data.horizon);
    spdlog::info("rollout mse {} = {}", name, mse);
    result.rollout.push_back({name, mse});
  }

  if (options.out) {
    std::ofstream trace(*options.out / "loss.csv");
    write_loss_trace(trace, result.train.trace);
    std::string summary = "final_train_loss=" + format_double(result.train.best_loss) + "\n" +
                          "best_epoch=" + std::to_string(result.train.best_epoch) + "\n" +
                          "epochs_run=" + std::to_string(result.train.trace.size()) + "\n" +
                          "noise_sigma=" + format_double(result.noise_sigma) + "\n";
    for (const RolloutScore& s : result.rollout) summary += "mse." + s.scenario + "=" + format_double(s.mse) + "\n";
    write_text(*options.out / "summary.txt", summary);
  }
  return result;
}

}  // namespace meshflow
