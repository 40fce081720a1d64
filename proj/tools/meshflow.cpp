#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "meshflow/error.hpp"

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("meshflow");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("MESHFLOW_LOG")) {
    const std::string level = env;
    if (level == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (level == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
      spdlog::set_level(spdlog::level::debug);
    } else {
      spdlog::warn("ignoring MESHFLOW_LOG={} (expected error, info or debug)", level);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace meshflow::cli;
  configure_logging();

  CLI::App app{"Graph U-Net surrogate for unsteady mesh flow fields"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic mesh and series files");
  gen_cmd->add_option("scenario", gen.scenario, "scenario name or 'all'")->required();
  gen_cmd->add_option("out", gen.out, "output directory")->required();
  gen_cmd->add_option("--steps", gen.steps, "snapshots per series")->capture_default_str();
  gen_cmd->add_option("--nodes", gen.nodes, "override the target node count");
  gen_cmd->add_option("--seed", gen.seed, "override the mesh seed");
  gen_cmd->add_flag("--force", gen.force, "overwrite existing files");

  auto* catalog_cmd = app.add_subcommand("catalog", "print the scenario catalog");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", tr.config, "key=value configuration file");
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--set", tr.overrides, "key=value override (repeatable)");
  train_cmd->add_option("--seed", tr.seed, "sets model.seed and train.seed");
  train_cmd->add_option("--workers", tr.workers, "threads for per-window passes")->capture_default_str();
  train_cmd->add_flag("--force", tr.force, "overwrite existing results");

  RolloutArgs ro;
  auto* rollout_cmd = app.add_subcommand("rollout", "autoregressive rollout from a checkpoint");
  rollout_cmd->add_option("--checkpoint", ro.checkpoint, "model checkpoint")->required();
  rollout_cmd->add_option("--mesh", ro.mesh, "mesh file")->required();
  rollout_cmd->add_option("--series", ro.series, "series providing the seed window")->required();
  rollout_cmd->add_option("--start", ro.start, "index of the first predicted snapshot")->required();
  rollout_cmd->add_option("--steps", ro.steps, "rollout horizon")->capture_default_str();
  rollout_cmd->add_option("--out", ro.out, "output directory")->required();
  rollout_cmd->add_flag("--force", ro.force, "overwrite existing results");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "rollout MSE against a ground-truth series");
  eval_cmd->add_option("--pred", ev.pred, "rollout directory or series file")->required();
  eval_cmd->add_option("--truth", ev.truth, "ground-truth series")->required();
  eval_cmd->add_option("--start", ev.start, "truth index of the first prediction (default: from the rollout)");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "train one model per value of an axis");
  sweep_cmd->add_option("--axis", sw.axis, "operator, pooling_ratio, noise_sigma, window or kernels")->required();
  sweep_cmd->add_option("--values", sw.values, "comma-separated axis values")->required()->delimiter(',');
  sweep_cmd->add_option("--config", sw.config, "base configuration file");
  sweep_cmd->add_option("--out", sw.out, "output directory")->required();
  sweep_cmd->add_option("--set", sw.overrides, "key=value override (repeatable)");
  sweep_cmd->add_option("--seed", sw.seed, "sets model.seed and train.seed");
  sweep_cmd->add_option("--workers", sw.workers, "cells run in parallel processes")->capture_default_str();
  sweep_cmd->add_flag("--force", sw.force, "overwrite existing results");

  PooledArgs po;
  auto* pooled_cmd = app.add_subcommand("export-pooled", "write the nodes kept at every pooling level");
  pooled_cmd->add_option("--checkpoint", po.checkpoint, "model checkpoint")->required();
  pooled_cmd->add_option("--mesh", po.mesh, "mesh file")->required();
  pooled_cmd->add_option("--series", po.series, "series providing the input window")->required();
  pooled_cmd->add_option("--start", po.start, "index just after the input window")->required();
  pooled_cmd->add_option("--out", po.out, "output file")->required();
  pooled_cmd->add_flag("--force", po.force, "overwrite an existing file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*catalog_cmd) return run_catalog();
    if (*train_cmd) return run_train(tr, argv[0]);
    if (*rollout_cmd) return run_rollout(ro);
    if (*eval_cmd) return run_eval(ev);
    if (*sweep_cmd) return run_sweep(sw, argv[0]);
    if (*pooled_cmd) return run_export_pooled(po);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const meshflow::NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return kExitNumeric;
  } catch (const meshflow::Error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
