#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "meshflow/error.hpp"
#include "meshflow/io.hpp"
#include "meshflow/synth.hpp"

using namespace meshflow;

namespace {

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Positive when d lies strictly inside the circumcircle of the
// counter-clockwise triangle abc.
double in_circle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double ax = a.x - d.x, ay = a.y - d.y;
  const double bx = b.x - d.x, by = b.y - d.y;
  const double cx = c.x - d.x, cy = c.y - d.y;
  return (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay) +
         (cx * cx + cy * cy) * (ax * by - bx * ay);
}

}  // namespace

TEST_CASE("delaunay triangles are counter-clockwise with empty circumcircles") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point2> pts(40);
    for (Point2& p : pts) p = {u(rng), u(rng)};
    const auto tris = delaunay(pts);
    // Euler: a triangulation of n points with h on the hull has 2n - 2 - h triangles.
    CHECK(tris.size() >= pts.size());
    for (const Triangle& t : tris) {
      const Point2 a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
      CHECK(orient(a, b, c) > 0.0);
      for (NodeId i = 0; i < pts.size(); ++i) {
        if (i == t[0] || i == t[1] || i == t[2]) continue;
        CHECK(in_circle(a, b, c, pts[i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("delaunay of a square and degenerate inputs") {
  const std::vector<Point2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  CHECK(delaunay(square).size() == 4);
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK(delaunay(line).empty());
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  CHECK(delaunay(two).empty());
}

TEST_CASE("generated meshes are deterministic and avoid the cylinder") {
  for (const ScenarioSpec& spec : scenario_catalog()) {
    CAPTURE(spec.name);
    const Graph a = generate_mesh(spec);
    const Graph b = generate_mesh(spec);
    CHECK(a == b);
    CHECK(a.validate().ok());
    const double n = static_cast<double>(a.num_nodes());
    CHECK(std::abs(n - static_cast<double>(spec.target_nodes)) <= 0.1 * static_cast<double>(spec.target_nodes));
    for (const Point2& p : a.coords()) {
      CHECK(distance(p, spec.center) > spec.radius());
      CHECK(p.x >= 0.0);
      CHECK(p.x <= spec.width);
      CHECK(p.y >= 0.0);
      CHECK(p.y <= spec.height);
    }
  }
}

TEST_CASE("invalid scenario specs are rejected") {
  ScenarioSpec s;
  s.center = {0.01, 0.2};
  CHECK_THROWS_AS(s.validate(), DataError);
  s = ScenarioSpec{};
  s.period = 3;
  CHECK_THROWS_AS(s.validate(), DataError);
  s = ScenarioSpec{};
  s.target_nodes = 49;
  CHECK_THROWS_AS(generate_mesh(s), DataError);
}

TEST_CASE("synthetic series is exactly periodic") {
  for (const ScenarioSpec& spec : scenario_catalog()) {
    const Graph g = generate_mesh(spec);
    const SnapshotSeries s = generate_series(spec, g, 3 * spec.period + 5);
    const auto p = static_cast<Eigen::Index>(spec.period);
    const double diff = (s.fields.topRows(2 * p + 5) - s.fields.middleRows(p, 2 * p + 5)).cwiseAbs().maxCoeff();
    CHECK(diff <= 1e-12);
    CHECK(s.fields.cwiseAbs().maxCoeff() <= spec.inflow + spec.wake_amplitude);
    CHECK(s.graph_id == spec.name);
  }
}

TEST_CASE("upstream of the cylinder the field is the inlet profile") {
  const ScenarioSpec spec = find_scenario("baseline");
  for (double y : {0.0, 0.05, 0.1, 0.205, 0.3, 0.41}) {
    const Point2 p{0.02, y};
    const double profile = 4.0 * spec.inflow * y * (spec.height - y) / (spec.height * spec.height);
    for (std::size_t t : {0u, 7u, 13u}) CHECK(synthetic_velocity(spec, p, t) == doctest::Approx(profile).epsilon(1e-15));
  }
}

TEST_CASE("a probe behind the cylinder oscillates with the shedding period") {
  for (const ScenarioSpec& spec : scenario_catalog()) {
    CAPTURE(spec.name);
    const Point2 probe{0.6, spec.center.y + 0.05};
    const std::size_t steps = 6 * spec.period;
    std::vector<double> v(steps);
    for (std::size_t t = 0; t < steps; ++t) v[t] = synthetic_velocity(spec, probe, t);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(steps);
    auto autocorr = [&](std::size_t lag) {
      double num = 0.0;
      for (std::size_t t = 0; t + lag < steps; ++t) num += (v[t] - mean) * (v[t + lag] - mean);
      return num / static_cast<double>(steps - lag);
    };
    std::size_t best = 2;
    for (std::size_t lag = 2; lag <= 2 * spec.period - 2; ++lag) {
      if (autocorr(lag) > autocorr(best)) best = lag;
    }
    CHECK(best == spec.period);
    CHECK(autocorr(spec.period) > 0.0);
  }
}

TEST_CASE("scenario catalog") {
  const auto specs = scenario_catalog();
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].name == "baseline");
  CHECK(specs[0].period == 29);
  CHECK(specs[1].period == 28);
  CHECK(specs[2].period == 28);
  CHECK(specs[3].period == 40);
  CHECK(specs[0].inflow == 1.78);
  CHECK(specs[1].inflow == 2.21);
  CHECK(specs[2].inflow == 2.02);
  CHECK(specs[3].inflow == 1.68);
  CHECK(specs[0].diameter == 0.074);
  CHECK(specs[1].diameter == 0.116);
  CHECK(specs[2].diameter == 0.089);
  CHECK(specs[3].diameter == 0.158);
  std::set<std::uint64_t> seeds;
  for (const auto& s : specs) seeds.insert(s.seed);
  CHECK(seeds.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < i; ++j) CHECK(!(generate_mesh(specs[i]) == generate_mesh(specs[j])));
  }
  CHECK(find_scenario("Induct 3").period == 40);
  CHECK(find_scenario("induct_1").name == "induct1");
  CHECK_THROWS_AS(find_scenario("induct4"), DataError);

  std::ostringstream os;
  write_catalog(os, specs);
  CHECK(os.str().rfind("name,period,inflow,diameter,", 0) == 0);
  CHECK(os.str().find("\ninduct3,40,1.68,0.158,") != std::string::npos);
}

TEST_CASE("generated data round-trips through the file formats") {
  const ScenarioSpec spec = find_scenario("induct2");
  const Graph g = generate_mesh(spec);
  const SnapshotSeries s = generate_series(spec, g, 40);
  std::stringstream mesh, series;
  write_mesh(mesh, g);
  write_series(series, s);
  const Graph g2 = read_mesh(mesh);
  const SnapshotSeries s2 = read_series(series);
  CHECK(g2 == g);
  CHECK(s2.fields == s.fields);
  CHECK(s2.dt == s.dt);
  CHECK(s2.graph_id == s.graph_id);
}
