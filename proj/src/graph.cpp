#include "meshflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "meshflow/error.hpp"

namespace meshflow {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<std::size_t> EdgeSet::in_degree() const {
  std::vector<std::size_t> deg(num_nodes, 0);
  for (NodeId d : dst) ++deg[d];
  return deg;
}

Graph Graph::build(std::vector<Point2> coords,
                   std::span<const std::pair<NodeId, NodeId>> undirected_edges) {
  const std::size_t n = coords.size();
  std::vector<Edge> directed;
  directed.reserve(2 * undirected_edges.size());
  for (const auto& [a, b] : undirected_edges) {
    if (a >= n || b >= n) {
      throw IndexError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                       ") references a node >= " + std::to_string(n));
    }
    if (a == b) throw DataError("self pair (" + std::to_string(a) + ", " + std::to_string(a) + ")");
    directed.push_back({a, b});
    directed.push_back({b, a});
  }
  std::sort(directed.begin(), directed.end());
  if (auto it = std::adjacent_find(directed.begin(), directed.end()); it != directed.end()) {
    throw DataError("duplicate pair (" + std::to_string(std::min(it->src, it->dst)) + ", " +
                    std::to_string(std::max(it->src, it->dst)) + ")");
  }
  Graph g;
  g.coords_ = std::move(coords);
  g.edges_ = std::move(directed);
  g.finalize();
  return g;
}

Graph Graph::from_directed(std::vector<Point2> coords, std::vector<Edge> directed) {
  const std::size_t n = coords.size();
  for (const Edge& e : directed) {
    if (e.src >= n || e.dst >= n) throw IndexError("directed edge references a node >= " + std::to_string(n));
    if (e.src == e.dst) throw DataError("self edge on node " + std::to_string(e.src));
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  for (const Edge& e : directed) {
    if (!std::binary_search(directed.begin(), directed.end(), Edge{e.dst, e.src})) {
      throw DataError("directed edge list is not symmetric");
    }
  }
  Graph g;
  g.coords_ = std::move(coords);
  g.edges_ = std::move(directed);
  g.finalize();
  return g;
}

void Graph::finalize() {
  const std::size_t n = coords_.size();
  edge_attr_.resize(edges_.size());
  offsets_.assign(n + 1, 0);
  auto es = std::make_shared<EdgeSet>();
  es->num_nodes = n;
  es->src.reserve(edges_.size());
  es->dst.reserve(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    edge_attr_[e] = distance(coords_[edges_[e].src], coords_[edges_[e].dst]);
    ++offsets_[edges_[e].src + 1];
    es->src.push_back(edges_[e].src);
    es->dst.push_back(edges_[e].dst);
  }
  es->attr = edge_attr_;
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  auto looped = std::make_shared<EdgeSet>(*es);
  for (std::size_t i = 0; i < n; ++i) {
    looped->src.push_back(static_cast<NodeId>(i));
    looped->dst.push_back(static_cast<NodeId>(i));
    looped->attr.push_back(0.0);
  }
  edge_set_ = std::move(es);
  looped_edge_set_ = std::move(looped);
}

std::span<const Edge> Graph::out_edges(NodeId i) const {
  return std::span<const Edge>(edges_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::vector<std::pair<NodeId, NodeId>> Graph::undirected_edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edges_.size() / 2);
  for (const Edge& e : edges_) {
    if (e.src < e.dst) out.emplace_back(e.src, e.dst);
  }
  return out;
}

ValidationReport Graph::validate() const {
  ValidationReport report;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edge_attr_[e] == 0.0) report.zero_length_edges.push_back(e);
  }
  return report;
}

double Graph::mean_edge_length() const {
  if (edge_attr_.empty()) return 0.0;
  return std::accumulate(edge_attr_.begin(), edge_attr_.end(), 0.0) /
         static_cast<double>(edge_attr_.size());
}

std::pair<Graph, IndexMap> induced_subgraph(const Graph& g,
                                            const std::function<bool(const Point2&)>& keep) {
  IndexMap map;
  map.old_size = g.num_nodes();
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    if (keep(g.coords()[i])) map.kept.push_back(i);
  }
  if (map.kept.empty()) throw DataError("induced subgraph would be empty");
  Graph sub = induced_subgraph(g, map.kept);
  return {std::move(sub), std::move(map)};
}

Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  constexpr NodeId kDropped = ~NodeId{0};
  std::vector<NodeId> renumber(g.num_nodes(), kDropped);
  std::vector<Point2> coords;
  coords.reserve(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] >= g.num_nodes()) throw IndexError("subgraph node out of range");
    if (renumber[nodes[k]] != kDropped) throw DataError("subgraph node listed twice");
    renumber[nodes[k]] = static_cast<NodeId>(k);
    coords.push_back(g.coords()[nodes[k]]);
  }
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) {
    const NodeId a = renumber[e.src];
    const NodeId b = renumber[e.dst];
    if (a != kDropped && b != kDropped) edges.push_back({a, b});
  }
  return Graph::from_directed(std::move(coords), std::move(edges));
}

void SnapshotSeries::validate(std::size_t expected_nodes) const {
  if (fields.rows() < 2) throw DataError("series '" + graph_id + "' needs at least 2 snapshots");
  if (!(dt > 0.0)) throw DataError("series '" + graph_id + "' has non-positive dt");
  if (expected_nodes != 0 && nodes() != expected_nodes) {
    throw DataError("series '" + graph_id + "' has " + std::to_string(nodes()) +
                    " nodes, graph has " + std::to_string(expected_nodes));
  }
}

SnapshotSeries restrict_series(const SnapshotSeries& s, const IndexMap& map) {
  if (s.fields.rows() == 0) throw DataError("cannot restrict an empty series");
  SnapshotSeries out;
  out.graph_id = s.graph_id;
  out.dt = s.dt;
  out.fields.resize(s.fields.rows(), static_cast<Eigen::Index>(map.kept.size()));
  for (std::size_t k = 0; k < map.kept.size(); ++k) {
    if (map.kept[k] >= s.nodes()) {
      throw IndexError("index map references node " + std::to_string(map.kept[k]) +
                       " but series has " + std::to_string(s.nodes()));
    }
    out.fields.col(static_cast<Eigen::Index>(k)) = s.fields.col(map.kept[k]);
  }
  return out;
}

}  // namespace meshflow
