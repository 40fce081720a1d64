#include "meshflow/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "meshflow/conv.hpp"
#include "meshflow/error.hpp"
#include "meshflow/io.hpp"

namespace meshflow {

std::size_t pooled_size(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw DataError("pooling ratio must lie in (0, 1]");
  // Guard against ratio * n landing a rounding error above an integer.
  const double k = std::ceil(ratio * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, std::max<std::size_t>(n, 1));
}

std::vector<NodeId> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<NodeId> order(scores.size());
  std::iota(order.begin(), order.end(), NodeId{0});
  k = std::min(k, order.size());
  auto better = [&](NodeId a, NodeId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  order.resize(k);
  return order;
}

Graph two_hop_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  constexpr NodeId kDropped = ~NodeId{0};
  std::vector<NodeId> renumber(g.num_nodes(), kDropped);
  std::vector<Point2> coords;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    renumber[nodes[k]] = static_cast<NodeId>(k);
    coords.push_back(g.coords()[nodes[k]]);
  }
  std::vector<Edge> edges;
  std::vector<char> seen(g.num_nodes(), 0);
  std::vector<NodeId> touched;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const NodeId a = nodes[k];
    for (const Edge& first : g.out_edges(a)) {
      for (const Edge& second : g.out_edges(first.dst)) {
        const NodeId b = second.dst;
        if (b == a || renumber[b] == kDropped || seen[b]) continue;
        seen[b] = 1;
        touched.push_back(b);
        edges.push_back({static_cast<NodeId>(k), renumber[b]});
      }
    }
    for (NodeId b : touched) seen[b] = 0;
    touched.clear();
  }
  return Graph::from_directed(std::move(coords), std::move(edges));
}

PoolLayer::PoolLayer(const std::string& name, std::size_t channels, double ratio, std::mt19937_64& rng,
                     bool use_power2_adjacency, GateActivation gate)
    : p_(name + ".p", glorot_uniform(channels, 1, rng)), ratio_(ratio), power2_(use_power2_adjacency), gate_(gate) {
  pooled_size(1, ratio);  // validates the ratio
}

PoolOutput PoolLayer::forward(Tape& tape, std::shared_ptr<const Graph> g, const Var& x) {
  const std::size_t n = g->num_nodes();
  if (n == 0) throw DataError("gpool on an empty graph");
  if (static_cast<std::size_t>(x.rows()) != n) throw ShapeError("gpool: feature rows do not match graph nodes");
  if (x.cols() != p_.value().rows()) {
    throw ShapeError("gpool: features have " + std::to_string(x.cols()) + " channels, projection has " +
                     std::to_string(p_.value().rows()));
  }
  if (p_.value().norm() == 0.0) throw NumericError("gpool: projection vector has zero norm");

  const Var p = tape.param(p_);
  const Var norm = ad::sqrt(ad::sum(ad::square(p)));
  const Var y = ad::mul(ad::matmul(x, p), ad::broadcast_rows(ad::reciprocal(norm), n));

  const Matrix& yv = y.value();
  std::vector<NodeId> idx = top_k(std::span<const double>(yv.data(), n), pooled_size(n, ratio_));

  const Var selected_scores = ad::row_gather(y, idx);
  const Var gate = gate_ == GateActivation::tanh ? ad::tanh(selected_scores) : ad::sigmoid(selected_scores);
  const Var gated = ad::mul(ad::row_gather(x, idx), ad::broadcast_cols(gate, static_cast<std::size_t>(x.cols())));

  auto coarse = std::make_shared<const Graph>(power2_ ? two_hop_subgraph(*g, idx) : induced_subgraph(*g, idx));
  return PoolOutput{std::move(coarse), gated, PoolRecord{std::move(g), std::move(idx)}};
}

UnpoolOutput gunpool(const PoolRecord& record, const Var& x) {
  if (static_cast<std::size_t>(x.rows()) != record.idx.size()) {
    throw ShapeError("gunpool: " + std::to_string(x.rows()) + " rows but record holds " +
                     std::to_string(record.idx.size()) + " indices");
  }
  return UnpoolOutput{record.graph, ad::row_scatter_add(x, record.idx, record.n_saved())};
}

void write_pooled_nodes(std::ostream& os, std::size_t level, std::span<const NodeId> original,
                        std::span<const Point2> coords) {
  os << "pooled_nodes " << level << '\n';
  for (std::size_t k = 0; k < original.size(); ++k) {
    os << original[k] << ' ' << format_double(coords[k].x) << ' ' << format_double(coords[k].y) << '\n';
  }
}

}  // namespace meshflow
