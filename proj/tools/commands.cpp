#include "commands.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <spdlog/spdlog.h>

#include "meshflow/config.hpp"
#include "meshflow/error.hpp"
#include "meshflow/experiment.hpp"
#include "meshflow/io.hpp"
#include "meshflow/pooling.hpp"
#include "meshflow/rollout.hpp"
#include "meshflow/synth.hpp"
#include "meshflow/unet.hpp"

extern char** environ;

namespace meshflow::cli {
namespace fs = std::filesystem;
namespace {

const std::vector<std::string> kResultFiles = {"config.txt", "checkpoint.bin", "loss.csv", "summary.txt"};

void refuse_existing(const std::vector<fs::path>& paths, bool force) {
  if (force) return;
  for (const fs::path& p : paths) {
    if (fs::exists(p)) throw UsageError("'" + p.string() + "' already exists (use --force to overwrite)");
  }
}

std::vector<fs::path> result_paths(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const std::string& name : kResultFiles) out.push_back(dir / name);
  return out;
}

KeyValues base_keys(const std::string& config, const std::vector<std::string>& overrides,
                    const std::optional<std::uint64_t>& seed) {
  KeyValues kv;
  if (!config.empty()) kv = KeyValues::load(config);
  for (const std::string& o : overrides) kv.set_assignment(o);
  if (seed) {
    kv.set("model.seed", std::to_string(*seed));
    kv.set("train.seed", std::to_string(*seed));
  }
  return kv;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

int run_gen(const GenArgs& args) {
  std::vector<ScenarioSpec> specs;
  if (args.scenario == "all") {
    specs = scenario_catalog();
  } else {
    specs.push_back(find_scenario(args.scenario));
  }
  const fs::path out(args.out);
  std::vector<fs::path> targets;
  for (const ScenarioSpec& s : specs) {
    targets.push_back(out / (s.name + ".mesh"));
    targets.push_back(out / (s.name + ".series"));
  }
  refuse_existing(targets, args.force);
  fs::create_directories(out);
  for (ScenarioSpec spec : specs) {
    if (args.nodes) spec.target_nodes = *args.nodes;
    if (args.seed) spec.seed = *args.seed;
    const Graph g = generate_mesh(spec);
    const SnapshotSeries series = generate_series(spec, g, args.steps);
    save_mesh(out / (spec.name + ".mesh"), g);
    save_series(out / (spec.name + ".series"), series);
    spdlog::info("{}: {} nodes, {} edges, {} snapshots", spec.name, g.num_nodes(), g.num_edges() / 2, args.steps);
  }
  return kExitOk;
}

int run_catalog() {
  const std::vector<ScenarioSpec> specs = scenario_catalog();
  write_catalog(std::cout, specs);
  return kExitOk;
}

int run_train(const TrainArgs& args, const std::string&) {
  const fs::path out(args.out);
  refuse_existing(result_paths(out), args.force);
  const ExperimentConfig config = experiment_from_keys(base_keys(args.config, args.overrides, args.seed));
  const ExperimentResult result = run_experiment(config, {.workers = std::max<std::size_t>(args.workers, 1), .out = out});
  std::cout << "final_train_loss=" << format_double(result.train.best_loss) << "\n";
  for (const RolloutScore& s : result.rollout) std::cout << "mse." << s.scenario << "=" << format_double(s.mse) << "\n";
  return kExitOk;
}

int run_rollout(const RolloutArgs& args) {
  const fs::path out(args.out);
  refuse_existing({out / "fields.txt", out / "probes.csv", out / "predictions.series", out / "rollout.txt"}, args.force);
  GraphUNet model = load_model(args.checkpoint);
  const Graph g = load_mesh(args.mesh);
  const SnapshotSeries series = load_series(args.series);
  series.validate(g.num_nodes());
  const std::size_t w = model.config().window();
  if (args.start < w || args.start > series.steps()) {
    throw DataError("--start must lie in [" + std::to_string(w) + ", " + std::to_string(series.steps()) +
                    "] for a window of " + std::to_string(w));
  }
  if (args.steps == 0) throw UsageError("--steps must be positive");
  const RolloutResult r = rollout(model, g, seed_window(series, args.start, w), args.steps);

  fs::create_directories(out);
  {
    std::ofstream os = open_out(out / "fields.txt");
    for (std::size_t s = 0; s < r.horizon(); ++s) {
      write_field(os, args.start + s, g, r.predictions.row(static_cast<Eigen::Index>(s)));
    }
  }
  const ProbeSet probes = bind_probes(g, default_probe_points());
  for (std::size_t i : probes.outside) spdlog::warn("probe {} lies outside the mesh bounding box", i + 1);
  {
    std::ofstream os = open_out(out / "probes.csv");
    write_probe_csv(os, probe_trace(r.predictions, probes), args.start);
  }
  SnapshotSeries pred;
  pred.graph_id = series.graph_id;
  pred.dt = series.dt;
  pred.fields = r.predictions;
  save_series(out / "predictions.series", pred);
  KeyValues meta;
  meta.set("start", std::to_string(args.start));
  meta.set("steps", std::to_string(args.steps));
  meta.set("checkpoint", args.checkpoint);
  meta.set("mesh", args.mesh);
  meta.set("series", args.series);
  std::ofstream os = open_out(out / "rollout.txt");
  meta.write(os);
  return kExitOk;
}

int run_eval(const EvalArgs& args) {
  fs::path pred_path(args.pred);
  std::size_t start = args.start.value_or(0);
  if (fs::is_directory(pred_path)) {
    if (!args.start) start = KeyValues::load(pred_path / "rollout.txt").get_size("start", 0);
    pred_path /= "predictions.series";
  }
  const SnapshotSeries pred = load_series(pred_path);
  const SnapshotSeries truth = load_series(args.truth);
  if (pred.nodes() != truth.nodes()) {
    throw DataError("prediction has " + std::to_string(pred.nodes()) + " nodes, truth has " +
                    std::to_string(truth.nodes()));
  }
  if (start + pred.steps() > truth.steps()) {
    throw DataError("truth series ends before the last predicted step");
  }
  const double mse = rollout_mse(pred.fields, truth.fields.middleRows(static_cast<Eigen::Index>(start),
                                                                       static_cast<Eigen::Index>(pred.steps())));
  std::string text = format_double(mse);
  if (text.find_first_of(".eEn") == std::string::npos) text += ".0";
  std::cout << text << "\n";
  return kExitOk;
}

namespace {

struct Cell {
  std::string id;
  std::vector<std::pair<std::string, std::string>> deltas;
  KeyValues keys;
};

std::vector<Cell> sweep_cells(const SweepArgs& args, const KeyValues& base) {
  static const std::vector<std::string> axes = {"operator", "pooling_ratio", "noise_sigma", "window", "kernels"};
  if (std::find(axes.begin(), axes.end(), args.axis) == axes.end()) {
    throw UsageError("unknown sweep axis '" + args.axis + "'");
  }
  if (args.values.empty()) throw UsageError("--values is empty");

  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  if (args.axis == "noise_sigma") {
    const std::string mode = base.get_string("train.noise", "none");
    const std::vector<std::string> modes =
        mode == "none" ? std::vector<std::string>{"input", "input_output"} : std::vector<std::string>{mode};
    // Values are relative to the field std when the base config says so.
    const bool relative = base.get_string("train.noise_sigma_rel", "none") != "none";
    for (const std::string& m : modes) {
      for (const std::string& v : args.values) {
        rows.push_back({{"train.noise", m}, {relative ? "train.noise_sigma_rel" : "train.noise_sigma", v}});
      }
    }
  } else {
    for (const std::string& v : args.values) {
      if (args.axis == "operator") {
        rows.push_back({{"model.operator", v}});
      } else if (args.axis == "pooling_ratio") {
        rows.push_back({{"model.pooling_ratio", v}});
      } else if (args.axis == "kernels") {
        rows.push_back({{"model.kernels", v}});
      } else {
        std::vector<std::pair<std::string, std::string>> d = {{"train.window", v}};
        if (auto channels = base.get("model.channels")) {
          std::vector<std::string> parts = split_list(*channels);
          parts.front() = v;
          std::string joined;
          for (std::size_t i = 0; i < parts.size(); ++i) joined += (i ? "," : "") + parts[i];
          d.push_back({"model.channels", joined});
        }
        rows.push_back(std::move(d));
      }
    }
  }

  std::vector<Cell> cells;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Cell c;
    c.id = fmt::format("cell{:02}", i);
    c.deltas = rows[i];
    c.keys = base;
    for (const auto& [k, v] : c.deltas) c.keys.set(k, v);
    try {
      experiment_from_keys(c.keys);
    } catch (const DataError& e) {
      throw UsageError(c.id + ": " + e.what());
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

int spawn_train(const std::string& self, const fs::path& dir, pid_t& pid) {
  const std::string config = (dir / "input.txt").string();
  const std::string out = dir.string();
  std::vector<std::string> argv_s = {self, "train", "--config", config, "--out", out, "--force"};
  std::vector<char*> argv;
  for (std::string& s : argv_s) argv.push_back(s.data());
  argv.push_back(nullptr);
  return posix_spawn(&pid, self.c_str(), nullptr, nullptr, argv.data(), environ);
}

}  // namespace

int run_sweep(const SweepArgs& args, const std::string& self) {
  const fs::path out(args.out);
  refuse_existing({out / "summary.csv"}, args.force);
  const KeyValues base = base_keys(args.config, args.overrides, args.seed);
  const std::vector<Cell> cells = sweep_cells(args, base);
  for (const Cell& c : cells) refuse_existing(result_paths(out / c.id), args.force);

  fs::create_directories(out);
  for (const Cell& c : cells) {
    fs::create_directories(out / c.id);
    std::ofstream os = open_out(out / c.id / "input.txt");
    c.keys.write(os);
  }

  if (args.workers <= 1) {
    for (const Cell& c : cells) {
      spdlog::info("{}: training", c.id);
      run_experiment(experiment_from_keys(c.keys), {.workers = 1, .out = out / c.id});
    }
  } else {
    std::map<pid_t, std::string> running;
    std::size_t next = 0;
    int failures = 0;
    while (next < cells.size() || !running.empty()) {
      while (next < cells.size() && running.size() < args.workers) {
        pid_t pid = 0;
        if (spawn_train(self, out / cells[next].id, pid) != 0) {
          throw DataError("cannot start '" + self + "' for " + cells[next].id);
        }
        spdlog::info("{}: started as process {}", cells[next].id, pid);
        running[pid] = cells[next].id;
        ++next;
      }
      int status = 0;
      const pid_t done = waitpid(-1, &status, 0);
      if (done < 0) break;
      const auto it = running.find(done);
      if (it == running.end()) continue;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        spdlog::error("{} failed", it->second);
        ++failures;
      }
      running.erase(it);
    }
    if (failures > 0) throw DataError(std::to_string(failures) + " sweep cell(s) failed");
  }

  const std::vector<std::string> eval = experiment_from_keys(base).data.eval;
  std::ofstream csv = open_out(out / "summary.csv");
  csv << "cell,deltas,final_train_loss";
  for (const std::string& s : eval) csv << ",mse." << s;
  csv << "\n";
  for (const Cell& c : cells) {
    const KeyValues summary = KeyValues::load(out / c.id / "summary.txt");
    std::string deltas;
    for (std::size_t i = 0; i < c.deltas.size(); ++i) {
      deltas += (i ? " " : "") + c.deltas[i].first + "=" + c.deltas[i].second;
    }
    csv << c.id << "," << csv_field(deltas) << "," << summary.get_string("final_train_loss", "");
    for (const std::string& s : eval) csv << "," << summary.get_string("mse." + s, "");
    csv << "\n";
  }
  std::cout << (out / "summary.csv").string() << "\n";
  return kExitOk;
}

int run_export_pooled(const PooledArgs& args) {
  const fs::path out(args.out);
  refuse_existing({out}, args.force);
  GraphUNet model = load_model(args.checkpoint);
  const Graph g = load_mesh(args.mesh);
  const SnapshotSeries series = load_series(args.series);
  series.validate(g.num_nodes());
  const std::size_t w = model.config().window();
  if (args.start < w || args.start > series.steps()) {
    throw DataError("--start must lie in [" + std::to_string(w) + ", " + std::to_string(series.steps()) + "]");
  }
  Tape tape(false);
  ForwardTrace trace;
  model.forward(tape, g, tape.constant(seed_window(series, args.start, w)), &trace);

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os = open_out(out);
  // Original ids of the nodes at the current level.
  std::vector<NodeId> original(g.num_nodes());
  for (std::size_t i = 0; i < original.size(); ++i) original[i] = static_cast<NodeId>(i);
  for (std::size_t level = 0; level < trace.records.size(); ++level) {
    std::vector<NodeId> next;
    for (NodeId k : trace.records[level].idx) next.push_back(original[k]);
    original = std::move(next);
    std::vector<Point2> coords;
    for (NodeId id : original) coords.push_back(g.coords()[id]);
    write_pooled_nodes(os, level + 1, original, coords);
  }
  return kExitOk;
}

}  // namespace meshflow::cli
