#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meshflow/autodiff.hpp"
#include "meshflow/graph.hpp"

namespace meshflow {

enum class GateActivation { tanh, sigmoid };

/// Structure saved by gPool so gUnpool can restore the finer level.
struct PoolRecord {
  std::shared_ptr<const Graph> graph;  // pre-pool adjacency, edge attributes and coordinates
  std::vector<NodeId> idx;             // selected pre-pool nodes, best score first

  std::size_t n_saved() const { return graph ? graph->num_nodes() : 0; }
};

/// k = ceil(ratio * n), clamped to [1, n].
std::size_t pooled_size(std::size_t n, double ratio);

/// Indices of the k largest scores, largest first; equal scores keep the
/// lower index first.
std::vector<NodeId> top_k(std::span<const double> scores, std::size_t k);

/// Pairs (i, j), i != j, of `nodes` joined by a two-step walk in `g`,
/// renumbered to positions in `nodes`.
Graph two_hop_subgraph(const Graph& g, std::span<const NodeId> nodes);

struct PoolOutput {
  std::shared_ptr<const Graph> graph;  // coarsened graph, node k = record.idx[k]
  Var x;                               // k x F gated features
  PoolRecord record;
};

/// Top-k graph pooling with a trainable projection vector p (F x 1):
/// y = X p / |p|, keep the top k rows, gate them by sigma(y).
class PoolLayer {
 public:
  PoolLayer(const std::string& name, std::size_t channels, double ratio, std::mt19937_64& rng,
            bool use_power2_adjacency = false, GateActivation gate = GateActivation::tanh);

  PoolOutput forward(Tape& tape, std::shared_ptr<const Graph> g, const Var& x);

  Parameter& projection() { return p_; }
  double ratio() const { return ratio_; }
  bool use_power2_adjacency() const { return power2_; }
  GateActivation gate() const { return gate_; }

 private:
  Parameter p_;
  double ratio_;
  bool power2_;
  GateActivation gate_;
};

struct UnpoolOutput {
  std::shared_ptr<const Graph> graph;
  Var x;  // n_saved x F, zero rows at unselected nodes
};

UnpoolOutput gunpool(const PoolRecord& record, const Var& x);

/// Writes "pooled_nodes <level>" followed by one "<original index> <x> <y>"
/// line per retained node. `original` maps the pooled level's nodes back to
/// the input mesh.
void write_pooled_nodes(std::ostream& os, std::size_t level, std::span<const NodeId> original,
                        std::span<const Point2> coords);

}  // namespace meshflow
