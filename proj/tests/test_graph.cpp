#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "meshflow/error.hpp"
#include "meshflow/graph.hpp"
#include "meshflow/io.hpp"
#include "oracles.hpp"

using namespace meshflow;

TEST_CASE("build: two nodes at Pythagorean distance") {
  std::vector<std::pair<NodeId, NodeId>> pairs{{0, 1}};
  const Graph g = Graph::build({{0, 0}, {3, 4}}, pairs);
  REQUIRE(g.num_edges() == 2);
  CHECK(g.edge_attr()[0] == 5.0);
  CHECK(g.edge_attr()[1] == 5.0);
  CHECK(g.edges()[0] == Edge{0, 1});
  CHECK(g.edges()[1] == Edge{1, 0});
}

TEST_CASE("build: single node has no edges") {
  const Graph g = Graph::build({{0.5, 0.5}}, {});
  CHECK(g.num_nodes() == 1);
  CHECK(g.num_edges() == 0);
  CHECK(g.degree(0) == 0);
}

TEST_CASE("build: right triangle edge lengths") {
  std::vector<std::pair<NodeId, NodeId>> pairs{{0, 1}, {1, 2}, {0, 2}};
  const Graph g = Graph::build({{0, 0}, {1, 0}, {0, 1}}, pairs);
  REQUIRE(g.num_edges() == 6);
  int ones = 0, roots = 0;
  for (double a : g.edge_attr()) {
    if (a == 1.0) ++ones;
    if (std::abs(a - std::sqrt(2.0)) < 1e-15) ++roots;
  }
  CHECK(ones == 4);
  CHECK(roots == 2);
}

TEST_CASE("build: rejects bad input") {
  std::vector<std::pair<NodeId, NodeId>> out_of_range{{0, 2}};
  CHECK_THROWS_AS(Graph::build({{0, 0}, {1, 0}}, out_of_range), IndexError);
  std::vector<std::pair<NodeId, NodeId>> self{{1, 1}};
  CHECK_THROWS_AS(Graph::build({{0, 0}, {1, 0}}, self), DataError);
  std::vector<std::pair<NodeId, NodeId>> dup{{0, 1}, {1, 0}};
  CHECK_THROWS_AS(Graph::build({{0, 0}, {1, 0}}, dup), DataError);
}

TEST_CASE("build: coincident endpoints are flagged, not rejected") {
  std::vector<std::pair<NodeId, NodeId>> pairs{{0, 1}, {1, 2}};
  const Graph g = Graph::build({{0, 0}, {0, 0}, {1, 0}}, pairs);
  const ValidationReport r = g.validate();
  CHECK_FALSE(r.ok());
  CHECK(r.zero_length_edges.size() == 2);
}

TEST_CASE("graph invariants on random graphs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Graph g = oracle::random_graph(2 + trial % 9, 0.5, rng);
    const auto edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      CHECK(edges[e].src < g.num_nodes());
      CHECK(edges[e].dst < g.num_nodes());
      if (e > 0) CHECK(edges[e - 1] < edges[e]);
      const Point2 a = g.coords()[edges[e].src];
      const Point2 b = g.coords()[edges[e].dst];
      CHECK(std::abs(g.edge_attr()[e] - std::hypot(a.x - b.x, a.y - b.y)) <= 1e-12 * g.edge_attr()[e]);
      // Reverse edge exists with the same attribute.
      const auto out = g.out_edges(edges[e].dst);
      bool found = false;
      for (std::size_t k = 0; k < out.size(); ++k) {
        if (out[k].dst == edges[e].src) {
          found = true;
          CHECK(g.edge_attr()[g.offsets()[edges[e].dst] + k] == g.edge_attr()[e]);
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("induced_subgraph on a chain") {
  const Graph g = Graph::build({{0.0, 0}, {0.6, 0}, {1.2, 0}}, std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {1, 2}});

  auto [left, map] = induced_subgraph(g, [](const Point2& p) { return p.x < 0.75; });
  CHECK(left.num_nodes() == 2);
  CHECK(left.num_edges() == 2);
  CHECK(map.kept == std::vector<NodeId>{0, 1});
  CHECK(left.edge_attr()[0] == g.edge_attr()[0]);

  auto [all, identity] = induced_subgraph(g, [](const Point2&) { return true; });
  CHECK(all == g);
  CHECK(identity.kept == std::vector<NodeId>{0, 1, 2});

  auto [last, only2] = induced_subgraph(g, [](const Point2& p) { return p.x > 1.0; });
  CHECK(last.num_nodes() == 1);
  CHECK(last.num_edges() == 0);
  CHECK(only2.kept == std::vector<NodeId>{2});

  CHECK_THROWS_AS(induced_subgraph(g, [](const Point2&) { return false; }), DataError);
}

TEST_CASE("restrict_series") {
  SnapshotSeries s;
  s.graph_id = "g";
  s.fields = Matrix{{1, 2, 3}, {4, 5, 6}};
  const SnapshotSeries same = restrict_series(s, {3, {0, 1, 2}});
  CHECK(same.fields == s.fields);
  CHECK(same.dt == s.dt);
  const SnapshotSeries picked = restrict_series(s, {3, {0, 2}});
  CHECK(picked.fields == Matrix{{1, 3}, {4, 6}});
  CHECK_THROWS(restrict_series(s, {3, {0, 3}}));
}

TEST_CASE("restrict_series after induced_subgraph keeps per-node values") {
  std::mt19937_64 rng(3);
  const Graph g = oracle::random_graph(9, 0.4, rng);
  SnapshotSeries s;
  s.fields = oracle::random_matrix(4, 9, rng);
  auto [sub, map] = induced_subgraph(g, [](const Point2& p) { return p.y < 0.5 || p.x < 0.3; });
  const SnapshotSeries r = restrict_series(s, map);
  for (std::size_t k = 0; k < map.kept.size(); ++k) {
    CHECK(r.fields.col(static_cast<Eigen::Index>(k)) == s.fields.col(map.kept[k]));
    CHECK(sub.coords()[k] == g.coords()[map.kept[k]]);
  }
}

TEST_CASE("series validation") {
  SnapshotSeries s;
  s.fields = Matrix::Zero(1, 3);
  CHECK_THROWS_AS(s.validate(), DataError);
  s.fields = Matrix::Zero(2, 3);
  CHECK_NOTHROW(s.validate(3));
  CHECK_THROWS_AS(s.validate(4), DataError);
  s.dt = 0.0;
  CHECK_THROWS_AS(s.validate(), DataError);
}

TEST_CASE("mesh and series text formats round-trip byte for byte") {
  std::mt19937_64 rng(11);
  const Graph g = oracle::random_graph(12, 0.3, rng);
  std::ostringstream first;
  write_mesh(first, g);
  std::istringstream in(first.str());
  const Graph back = read_mesh(in);
  CHECK(back == g);
  std::ostringstream second;
  write_mesh(second, back);
  CHECK(second.str() == first.str());

  SnapshotSeries s;
  s.graph_id = "random12";
  s.dt = 0.01;
  s.fields = oracle::random_matrix(5, 12, rng);
  s.fields(0, 0) = 0.1;
  s.fields(0, 1) = -1e-300;
  std::ostringstream a;
  write_series(a, s);
  std::istringstream ain(a.str());
  const SnapshotSeries t = read_series(ain);
  CHECK(t.fields == s.fields);
  CHECK(t.graph_id == s.graph_id);
  CHECK(t.dt == s.dt);
  std::ostringstream b;
  write_series(b, t);
  CHECK(b.str() == a.str());
}

TEST_CASE("format_double is shortest and exact") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(5.0) == "5");
  for (double v : {1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.30000000000000004}) {
    CHECK(parse_double(format_double(v), 1) == v);
  }
}

TEST_CASE("mesh parser reports the failing line") {
  std::istringstream in("mesh 2 1\nv 0 0\nv 1 x\ne 0 1\n");
  try {
    read_mesh(in);
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream bad_header("series g 2 2\n");
  CHECK_THROWS_AS(read_series(bad_header), DataError);
}
