#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "meshflow/graph.hpp"
#include "meshflow/matrix.hpp"
#include "meshflow/unet.hpp"

namespace meshflow {

/// Maps an N x W window (oldest first) to the next N x 1 snapshot.
using Predictor = std::function<Matrix(const Matrix& window)>;

struct RolloutResult {
  Matrix predictions;  // S x N
  std::size_t start = 0;  // series index of the first predicted snapshot

  std::size_t horizon() const { return static_cast<std::size_t>(predictions.rows()); }
};

/// Autoregressive rollout: predict, drop the oldest column, append the
/// prediction, repeat `steps` times. Throws NumericError naming the step when
/// a prediction is non-finite.
RolloutResult rollout(const Predictor& predict, const Matrix& seed_window, std::size_t steps);
RolloutResult rollout(GraphUNet& model, const Graph& g, const Matrix& seed_window, std::size_t steps);

/// Seed window of `window` snapshots ending just before `start`, as N x W.
Matrix seed_window(const SnapshotSeries& series, std::size_t start, std::size_t window);

/// Mean over steps and nodes of the squared error.
double rollout_mse(const Matrix& predictions, const Matrix& truth);

struct ProbeSet {
  std::vector<Point2> points;
  std::vector<NodeId> nodes;
  /// Probes lying outside the mesh bounding box.
  std::vector<std::size_t> outside;
};

/// The seven points at x = 0.6, y = 0.05 .. 0.35.
std::vector<Point2> default_probe_points();

/// Binds each point to its nearest node, ties to the lower index.
ProbeSet bind_probes(const Graph& g, std::vector<Point2> points);

/// S x P values of the bound nodes, one row per step of `fields` (S x N).
Matrix probe_trace(const Matrix& fields, const ProbeSet& probes);

/// "field <step>" header then one "x y value" line per node.
void write_field(std::ostream& os, std::size_t step, const Graph& g, const Matrix& values_row);
/// "step,p1,...,pP" then one row per step.
void write_probe_csv(std::ostream& os, const Matrix& trace, std::size_t first_step = 0);

}  // namespace meshflow
