#include "meshflow/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <utility>

#include "meshflow/error.hpp"
#include "meshflow/io.hpp"

namespace meshflow {
namespace {

struct WorkTriangle {
  std::array<std::size_t, 3> v;
  Point2 center;
  double radius2;
};

double cross(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

WorkTriangle make_triangle(std::size_t a, std::size_t b, std::size_t c, const std::vector<Point2>& pts) {
  if (cross(pts[a], pts[b], pts[c]) < 0.0) std::swap(b, c);
  const Point2& A = pts[a];
  const Point2& B = pts[b];
  const Point2& C = pts[c];
  const double d = 2.0 * (A.x * (B.y - C.y) + B.x * (C.y - A.y) + C.x * (A.y - B.y));
  WorkTriangle t{{a, b, c}, {0.0, 0.0}, std::numeric_limits<double>::infinity()};
  if (d != 0.0) {
    const double a2 = A.x * A.x + A.y * A.y, b2 = B.x * B.x + B.y * B.y, c2 = C.x * C.x + C.y * C.y;
    t.center = {(a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2 * (A.y - B.y)) / d,
                (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2 * (B.x - A.x)) / d};
    const double dx = A.x - t.center.x, dy = A.y - t.center.y;
    t.radius2 = dx * dx + dy * dy;
  }
  return t;
}

double surface_distance(const ScenarioSpec& spec, const Point2& p) {
  return distance(p, spec.center) - spec.radius();
}

Graph try_generate_mesh(const ScenarioSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double area = spec.width * spec.height;
  const double h0 = std::sqrt(area / static_cast<double>(spec.target_nodes) * 2.0 / std::sqrt(3.0));

  std::vector<Point2> pts;
  const auto nx = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(spec.width / (1.4 * h0))));
  const auto ny = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(spec.height / (1.4 * h0))));
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = spec.width * static_cast<double>(i) / static_cast<double>(nx);
    pts.push_back({x, 0.0});
    pts.push_back({spec.width - x, spec.height});
  }
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = spec.height * static_cast<double>(j) / static_cast<double>(ny);
    pts.push_back({spec.width, y});
    pts.push_back({0.0, spec.height - y});
  }
  const auto ring = std::max<std::size_t>(
      8, static_cast<std::size_t>(std::lround(std::numbers::pi * spec.diameter / (0.45 * h0))));
  const double ring_radius = spec.radius() * (1.0 + 1e-9);
  const double phase = unit(rng);
  for (std::size_t k = 0; k < ring; ++k) {
    const double a = 2.0 * std::numbers::pi * (static_cast<double>(k) + phase) / static_cast<double>(ring);
    pts.push_back({spec.center.x + ring_radius * std::cos(a), spec.center.y + ring_radius * std::sin(a)});
  }
  if (pts.size() + 10 > spec.target_nodes) throw DataError("target node count too small for the boundary");

  // Dart throwing with a spacing that grows away from the cylinder; the
  // spacing factor shrinks whenever darts keep missing.
  auto spacing = [&](const Point2& p) {
    return h0 * (0.45 + 0.75 * (1.0 - std::exp(-surface_distance(spec, p) / 0.25)));
  };
  double factor = 0.9;
  std::size_t misses = 0;
  while (pts.size() < spec.target_nodes) {
    const Point2 p{unit(rng) * spec.width, unit(rng) * spec.height};
    const double s = spacing(p) * factor;
    bool ok = surface_distance(spec, p) > 0.5 * s && p.x > 0.4 * s && p.y > 0.4 * s &&
              spec.width - p.x > 0.4 * s && spec.height - p.y > 0.4 * s;
    for (std::size_t i = 0; ok && i < pts.size(); ++i) ok = distance(p, pts[i]) > s;
    if (ok) {
      pts.push_back(p);
      misses = 0;
    } else if (++misses > 300) {
      factor *= 0.95;
      misses = 0;
    }
  }

  std::vector<Triangle> tris = delaunay(pts);
  std::erase_if(tris, [&](const Triangle& t) {
    const Point2 c{(pts[t[0]].x + pts[t[1]].x + pts[t[2]].x) / 3.0, (pts[t[0]].y + pts[t[1]].y + pts[t[2]].y) / 3.0};
    return distance(c, spec.center) < spec.radius();
  });
  if (tris.empty()) throw DataError("degenerate triangulation");

  std::vector<NodeId> renumber(pts.size(), ~NodeId{0});
  std::vector<Point2> coords;
  for (const Triangle& t : tris) {
    for (NodeId v : t) {
      if (renumber[v] == ~NodeId{0}) renumber[v] = 0;
    }
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (renumber[i] != ~NodeId{0}) {
      renumber[i] = static_cast<NodeId>(coords.size());
      coords.push_back(pts[i]);
    }
  }
  std::set<std::pair<NodeId, NodeId>> edges;
  for (const Triangle& t : tris) {
    for (int k = 0; k < 3; ++k) {
      NodeId a = renumber[t[k]], b = renumber[t[(k + 1) % 3]];
      edges.insert(std::minmax(a, b));
    }
  }
  const std::vector<std::pair<NodeId, NodeId>> pairs(edges.begin(), edges.end());
  return Graph::build(std::move(coords), pairs);
}

double smoothstep_bump(double r, double radius) {
  if (r >= radius) return 0.0;
  const double q = 1.0 - (r / radius) * (r / radius);
  return q * q;
}

}  // namespace

std::vector<Triangle> delaunay(std::span<const Point2> input) {
  const std::size_t n = input.size();
  if (n < 3) return {};
  std::vector<Point2> pts(input.begin(), input.end());
  Point2 lo = pts[0], hi = pts[0];
  for (const Point2& p : pts) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double span = std::max({hi.x - lo.x, hi.y - lo.y, 1e-12});
  const Point2 mid{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
  pts.push_back({mid.x - 100.0 * span, mid.y - 100.0 * span});
  pts.push_back({mid.x + 100.0 * span, mid.y - 100.0 * span});
  pts.push_back({mid.x, mid.y + 100.0 * span});

  std::vector<WorkTriangle> tris{make_triangle(n, n + 1, n + 2, pts)};
  std::vector<std::pair<std::size_t, std::size_t>> cavity;
  std::vector<WorkTriangle> kept;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = pts[i];
    cavity.clear();
    kept.clear();
    for (const WorkTriangle& t : tris) {
      const double dx = p.x - t.center.x, dy = p.y - t.center.y;
      if (dx * dx + dy * dy < t.radius2) {
        for (int k = 0; k < 3; ++k) cavity.emplace_back(t.v[k], t.v[(k + 1) % 3]);
      } else {
        kept.push_back(t);
      }
    }
    // Cavity boundary: directed edges whose reverse is not also in the cavity.
    std::sort(cavity.begin(), cavity.end());
    for (const auto& [a, b] : cavity) {
      if (!std::binary_search(cavity.begin(), cavity.end(), std::make_pair(b, a))) {
        kept.push_back(make_triangle(a, b, i, pts));
      }
    }
    tris.swap(kept);
  }

  std::vector<Triangle> out;
  const double min_area = 1e-12 * span * span;
  for (const WorkTriangle& t : tris) {
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    if (0.5 * cross(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]]) <= min_area) continue;
    Triangle tri{static_cast<NodeId>(t.v[0]), static_cast<NodeId>(t.v[1]), static_cast<NodeId>(t.v[2])};
    std::rotate(tri.begin(), std::min_element(tri.begin(), tri.end()), tri.end());
    out.push_back(tri);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ScenarioSpec::validate() const {
  if (!(width > 0.0 && height > 0.0)) throw DataError("scenario '" + name + "': domain must have positive extent");
  const double r = radius();
  if (!(r > 0.0) || center.x - r <= 0.0 || center.x + r >= width || center.y - r <= 0.0 || center.y + r >= height) {
    throw DataError("scenario '" + name + "': cylinder must lie strictly inside the domain");
  }
  if (period < 4) throw DataError("scenario '" + name + "': period must be at least 4 snapshots");
  if (target_nodes < 50) throw DataError("scenario '" + name + "': target node count must be at least 50");
  if (!(dt > 0.0) || !(inflow > 0.0) || wake_amplitude < 0.0) {
    throw DataError("scenario '" + name + "': dt and inflow must be positive, amplitude non-negative");
  }
}

Graph generate_mesh(const ScenarioSpec& spec) {
  spec.validate();
  constexpr int kAttempts = 5;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    try {
      Graph g = try_generate_mesh(spec, spec.seed + static_cast<std::uint64_t>(attempt) * 0x9e3779b97f4a7c15ULL);
      if (g.num_nodes() >= spec.target_nodes * 9 / 10 && g.validate().ok()) return g;
    } catch (const DataError&) {
    }
  }
  throw DataError("scenario '" + spec.name + "': mesh generation failed after " + std::to_string(kAttempts) +
                  " attempts");
}

double synthetic_velocity(const ScenarioSpec& spec, const Point2& p, std::size_t t) {
  const double U = spec.inflow;
  const double D = spec.diameter;
  const double profile = 4.0 * p.y * (spec.height - p.y) / (spec.height * spec.height);
  const double mask = smoothstep_bump(distance(p, spec.center), 1.5 * D);
  const double base = U * profile * (1.0 - mask);

  const double s = p.x - spec.center.x;
  if (s <= 0.0) return base;
  const double onset = 1.0 - std::exp(-(s / (2.0 * D)) * (s / (2.0 * D)));
  const double decay = std::exp(-s / 1.2);
  const double half_width = 1.2 * D + 0.12 * s;
  const double dy = p.y - spec.center.y;
  const double envelope = onset * decay * std::exp(-(dy / half_width) * (dy / half_width));
  const double alternation = std::tanh(dy / (0.5 * D));
  // The phase uses t mod P so the series repeats exactly.
  const double cycle = static_cast<double>(t % spec.period) / static_cast<double>(spec.period);
  const double wave = std::sin(2.0 * std::numbers::pi * (cycle - s / spec.wavelength()));
  return base + spec.wake_amplitude * envelope * wave * alternation;
}

SnapshotSeries generate_series(const ScenarioSpec& spec, const Graph& g, std::size_t steps) {
  if (steps == 0) throw DataError("series needs at least one snapshot");
  SnapshotSeries s;
  s.graph_id = spec.name;
  s.dt = spec.dt;
  s.fields.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(g.num_nodes()));
  for (std::size_t t = 0; t < steps; ++t) {
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
      s.fields(static_cast<Eigen::Index>(t), i) = synthetic_velocity(spec, g.coords()[i], t);
    }
  }
  return s;
}

std::vector<ScenarioSpec> scenario_catalog() {
  auto make = [](std::string name, Point2 center, double diameter, double inflow, std::size_t period,
                 std::uint64_t seed) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.center = center;
    s.diameter = diameter;
    s.inflow = inflow;
    s.period = period;
    s.wake_amplitude = 0.3 * inflow;
    s.seed = seed;
    return s;
  };
  return {
      make("baseline", {0.20, 0.20}, 0.074, 1.78, 29, 1001),
      make("induct1", {0.25, 0.18}, 0.116, 2.21, 28, 1002),
      make("induct2", {0.22, 0.22}, 0.089, 2.02, 28, 1003),
      make("induct3", {0.30, 0.20}, 0.158, 1.68, 40, 1004),
  };
}

ScenarioSpec find_scenario(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (c != ' ' && c != '_' && c != '-') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  for (const ScenarioSpec& s : scenario_catalog()) {
    if (s.name == key) return s;
  }
  throw DataError("unknown scenario '" + name + "' (expected baseline, induct1, induct2 or induct3)");
}

void write_catalog(std::ostream& os, std::span<const ScenarioSpec> specs) {
  os << "name,period,inflow,diameter,center_x,center_y,target_nodes,wake_amplitude,seed\n";
  for (const ScenarioSpec& s : specs) {
    os << s.name << ',' << s.period << ',' << format_double(s.inflow) << ',' << format_double(s.diameter) << ','
       << format_double(s.center.x) << ',' << format_double(s.center.y) << ',' << s.target_nodes << ','
       << format_double(s.wake_amplitude) << ',' << s.seed << '\n';
  }
}

}  // namespace meshflow
