#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "meshflow/graph.hpp"

namespace meshflow {

using Triangle = std::array<NodeId, 3>;

/// Bowyer-Watson Delaunay triangulation. Triangles are counter-clockwise and
/// sorted; zero-area triangles are dropped. Returns an empty list when the
/// points are collinear or fewer than three.
std::vector<Triangle> delaunay(std::span<const Point2> points);

/// Parameters of one synthetic cylinder-wake scenario.
struct ScenarioSpec {
  std::string name;
  double width = 1.6;
  double height = 0.41;
  Point2 center{0.2, 0.2};
  double diameter = 0.074;
  double inflow = 1.78;      // peak of the parabolic inlet profile, m/s
  std::size_t period = 29;   // snapshots per shedding cycle
  std::size_t target_nodes = 400;
  double wake_amplitude = 0.534;  // m/s
  double dt = 0.01;
  std::uint64_t seed = 0;

  double radius() const { return 0.5 * diameter; }
  /// Distance one wake crest travels in a period.
  double wavelength() const { return 0.6 * inflow * static_cast<double>(period) * dt; }
  /// Throws DataError unless the cylinder lies strictly inside the domain,
  /// period >= 4 and target_nodes >= 50.
  void validate() const;
};

/// Seeded point cloud, denser near the cylinder, triangulated; triangles
/// whose centroid falls inside the cylinder are removed.
Graph generate_mesh(const ScenarioSpec& spec);

/// Field value at (p, t); exactly periodic in t with the spec's period.
double synthetic_velocity(const ScenarioSpec& spec, const Point2& p, std::size_t t);

/// T snapshots of synthetic_velocity on the mesh nodes.
SnapshotSeries generate_series(const ScenarioSpec& spec, const Graph& g, std::size_t steps);

/// Baseline and Induct 1-3.
std::vector<ScenarioSpec> scenario_catalog();
/// Case-insensitive lookup ("baseline", "induct1", ...); throws DataError.
ScenarioSpec find_scenario(const std::string& name);

void write_catalog(std::ostream& os, std::span<const ScenarioSpec> specs);

}  // namespace meshflow
