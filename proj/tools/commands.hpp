#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Bad flags or a refused overwrite.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenArgs {
  std::string scenario;
  std::string out;
  std::size_t steps = 400;
  std::optional<std::size_t> nodes;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

struct TrainArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool force = false;
};

struct RolloutArgs {
  std::string checkpoint;
  std::string mesh;
  std::string series;
  std::size_t start = 0;
  std::size_t steps = 100;
  std::string out;
  bool force = false;
};

struct EvalArgs {
  std::string pred;
  std::string truth;
  std::optional<std::size_t> start;
};

struct SweepArgs {
  std::string axis;
  std::vector<std::string> values;
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool force = false;
};

struct PooledArgs {
  std::string checkpoint;
  std::string mesh;
  std::string series;
  std::size_t start = 0;
  std::string out;
  bool force = false;
};

int run_gen(const GenArgs& args);
int run_catalog();
int run_train(const TrainArgs& args, const std::string& self);
int run_rollout(const RolloutArgs& args);
int run_eval(const EvalArgs& args);
int run_sweep(const SweepArgs& args, const std::string& self);
int run_export_pooled(const PooledArgs& args);

}  // namespace meshflow::cli
