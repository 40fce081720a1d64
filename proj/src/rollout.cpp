#include "meshflow/rollout.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "meshflow/error.hpp"
#include "meshflow/io.hpp"

namespace meshflow {

RolloutResult rollout(const Predictor& predict, const Matrix& seed_window, std::size_t steps) {
  if (steps == 0) throw DataError("rollout horizon must be at least 1");
  if (seed_window.cols() == 0) throw ShapeError("rollout: empty seed window");
  const Eigen::Index n = seed_window.rows();
  const Eigen::Index w = seed_window.cols();
  RolloutResult result;
  result.predictions.resize(static_cast<Eigen::Index>(steps), n);
  Matrix window = seed_window;
  for (std::size_t s = 0; s < steps; ++s) {
    Matrix next = predict(window);
    if (next.rows() != n || next.cols() != 1) {
      throw ShapeError("rollout: predictor returned " + std::to_string(next.rows()) + "x" +
                       std::to_string(next.cols()) + ", expected " + std::to_string(n) + "x1");
    }
    if (!next.allFinite()) throw NumericError("rollout: non-finite prediction at step " + std::to_string(s + 1));
    result.predictions.row(static_cast<Eigen::Index>(s)) = next.col(0).transpose();
    if (w > 1) window.leftCols(w - 1) = window.rightCols(w - 1).eval();
    window.col(w - 1) = next.col(0);
  }
  return result;
}

RolloutResult rollout(GraphUNet& model, const Graph& g, const Matrix& seed_window, std::size_t steps) {
  if (static_cast<std::size_t>(seed_window.cols()) != model.config().window()) {
    throw ShapeError("rollout: seed window has " + std::to_string(seed_window.cols()) + " snapshots, model expects " +
                     std::to_string(model.config().window()));
  }
  return rollout([&](const Matrix& window) { return model.predict(g, window); }, seed_window, steps);
}

Matrix seed_window(const SnapshotSeries& series, std::size_t start, std::size_t window) {
  if (window == 0 || start < window || start > series.steps()) {
    throw DataError("cannot take a " + std::to_string(window) + "-snapshot window before index " +
                    std::to_string(start) + " of a " + std::to_string(series.steps()) + "-snapshot series");
  }
  return series.fields
      .middleRows(static_cast<Eigen::Index>(start - window), static_cast<Eigen::Index>(window))
      .transpose();
}

double rollout_mse(const Matrix& predictions, const Matrix& truth) {
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols()) {
    throw ShapeError("rollout_mse: prediction is " + std::to_string(predictions.rows()) + "x" +
                     std::to_string(predictions.cols()) + ", truth is " + std::to_string(truth.rows()) + "x" +
                     std::to_string(truth.cols()));
  }
  if (predictions.size() == 0) throw ShapeError("rollout_mse: empty input");
  double total = 0.0;
  for (Eigen::Index s = 0; s < predictions.rows(); ++s) {
    double step = 0.0;
    for (Eigen::Index n = 0; n < predictions.cols(); ++n) {
      const double d = truth(s, n) - predictions(s, n);
      step += d * d;
    }
    total += step / static_cast<double>(predictions.cols());
  }
  return total / static_cast<double>(predictions.rows());
}

std::vector<Point2> default_probe_points() {
  std::vector<Point2> points;
  for (int k = 1; k <= 7; ++k) points.push_back({0.6, 0.05 * k});
  return points;
}

ProbeSet bind_probes(const Graph& g, std::vector<Point2> points) {
  if (g.num_nodes() == 0) throw DataError("cannot bind probes on an empty mesh");
  Point2 lo = g.coords()[0], hi = g.coords()[0];
  for (const Point2& c : g.coords()) {
    lo = {std::min(lo.x, c.x), std::min(lo.y, c.y)};
    hi = {std::max(hi.x, c.x), std::max(hi.y, c.y)};
  }
  ProbeSet set;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Point2& p = points[k];
    if (p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y) set.outside.push_back(k);
    NodeId best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
      const double dx = g.coords()[i].x - p.x, dy = g.coords()[i].y - p.y;
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    set.nodes.push_back(best);
  }
  set.points = std::move(points);
  return set;
}

Matrix probe_trace(const Matrix& fields, const ProbeSet& probes) {
  Matrix trace(fields.rows(), static_cast<Eigen::Index>(probes.nodes.size()));
  for (std::size_t k = 0; k < probes.nodes.size(); ++k) {
    if (probes.nodes[k] >= fields.cols()) throw IndexError("probe bound to node outside the field");
    trace.col(static_cast<Eigen::Index>(k)) = fields.col(probes.nodes[k]);
  }
  return trace;
}

void write_field(std::ostream& os, std::size_t step, const Graph& g, const Matrix& values_row) {
  if (static_cast<std::size_t>(values_row.size()) != g.num_nodes()) {
    throw ShapeError("write_field: value count does not match node count");
  }
  os << "field " << step << '\n';
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    os << format_double(g.coords()[i].x) << ' ' << format_double(g.coords()[i].y) << ' '
       << format_double(values_row.data()[i]) << '\n';
  }
}

void write_probe_csv(std::ostream& os, const Matrix& trace, std::size_t first_step) {
  os << "step";
  for (Eigen::Index k = 0; k < trace.cols(); ++k) os << ",p" << k + 1;
  os << '\n';
  for (Eigen::Index s = 0; s < trace.rows(); ++s) {
    os << first_step + static_cast<std::size_t>(s);
    for (Eigen::Index k = 0; k < trace.cols(); ++k) os << ',' << format_double(trace(s, k));
    os << '\n';
  }
}

}  // namespace meshflow
