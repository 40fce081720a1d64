#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meshflow/matrix.hpp"

namespace meshflow {

using NodeId = std::uint32_t;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(const Point2& a, const Point2& b);

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Directed edge list in a form the differentiation engine can keep alive
/// across a backward pass. Messages flow src -> dst.
struct EdgeSet {
  std::size_t num_nodes = 0;
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  /// Per-edge pseudo-coordinate (edge length; 0 on self loops).
  std::vector<double> attr;

  std::size_t size() const { return src.size(); }
  /// Number of edges arriving at each node.
  std::vector<std::size_t> in_degree() const;
};

struct ValidationReport {
  /// Directed edge positions whose endpoints coincide.
  std::vector<std::size_t> zero_length_edges;

  bool ok() const { return zero_length_edges.empty(); }
};

/// Immutable 2D mesh graph. Every undirected mesh edge is stored as two
/// directed edges sorted by (src, dst); edge attributes are Euclidean lengths.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph from node positions and undirected index pairs.
  /// Throws IndexError on out-of-range indices and DataError on self pairs or
  /// duplicate pairs.
  static Graph build(std::vector<Point2> coords,
                     std::span<const std::pair<NodeId, NodeId>> undirected_edges);

  /// Builds from an already symmetric directed edge list (used by pooling).
  static Graph from_directed(std::vector<Point2> coords, std::vector<Edge> directed);

  std::size_t num_nodes() const { return coords_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const Point2> coords() const { return coords_; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const double> edge_attr() const { return edge_attr_; }

  /// Edges leaving node i occupy [offsets[i], offsets[i+1]).
  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const Edge> out_edges(NodeId i) const;
  std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }

  /// Each undirected pair once, with src < dst.
  std::vector<std::pair<NodeId, NodeId>> undirected_edges() const;

  /// Shared directed edge set for aggregation primitives.
  const std::shared_ptr<const EdgeSet>& edge_set() const { return edge_set_; }
  /// edge_set() followed by one self loop per node, in node order.
  const std::shared_ptr<const EdgeSet>& looped_edge_set() const { return looped_edge_set_; }

  ValidationReport validate() const;

  double mean_edge_length() const;

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.coords_ == b.coords_ && a.edges_ == b.edges_ && a.edge_attr_ == b.edge_attr_;
  }

 private:
  void finalize();

  std::vector<Point2> coords_;
  std::vector<Edge> edges_;
  std::vector<double> edge_attr_;
  std::vector<std::size_t> offsets_{0};
  std::shared_ptr<const EdgeSet> edge_set_ = std::make_shared<EdgeSet>();
  std::shared_ptr<const EdgeSet> looped_edge_set_ = std::make_shared<EdgeSet>();
};

/// Maps old node ids to new ones; kept[new] == old.
struct IndexMap {
  std::size_t old_size = 0;
  std::vector<NodeId> kept;
};

/// Keeps the nodes whose coordinates satisfy `keep`, renumbered densely in
/// original order. Edges survive only when both endpoints survive.
std::pair<Graph, IndexMap> induced_subgraph(const Graph& g,
                                            const std::function<bool(const Point2&)>& keep);

/// Induced subgraph on an explicit node list; new node k is old node nodes[k].
/// Edge attributes are recomputed from the retained coordinates.
Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Time series of per-node scalars on one graph. fields is T x N.
struct SnapshotSeries {
  std::string graph_id;
  double dt = 0.01;
  Matrix fields;

  std::size_t steps() const { return static_cast<std::size_t>(fields.rows()); }
  std::size_t nodes() const { return static_cast<std::size_t>(fields.cols()); }

  /// Throws DataError unless T >= 2, dt > 0 and (if given) N matches.
  void validate(std::size_t expected_nodes = 0) const;
};

SnapshotSeries restrict_series(const SnapshotSeries& s, const IndexMap& map);

}  // namespace meshflow
