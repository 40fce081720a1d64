#include <doctest.h>

#include <cmath>
#include <random>

#include "meshflow/conv.hpp"
#include "meshflow/error.hpp"
#include "meshflow/gradcheck.hpp"
#include "oracles.hpp"

using namespace meshflow;

namespace {

Matrix run(ConvLayer& layer, const Graph& g, const Matrix& x) {
  Tape tape(false);
  return layer.forward(tape, g, tape.constant(x)).value();
}

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("gcn on an isolated node is the identity") {
  std::mt19937_64 rng(1);
  const Graph g = Graph::build({{0, 0}}, {});
  for (GcnVariant v : {GcnVariant::vanilla, GcnVariant::improved}) {
    GcnLayer layer("gcn", 2, 2, v, rng);
    layer.theta().value() = Matrix::Identity(2, 2);
    CHECK(run(layer, g, Matrix{{0.7, -1.1}}) == Matrix{{0.7, -1.1}});
  }
}

TEST_CASE("gcn on two connected nodes averages") {
  std::mt19937_64 rng(1);
  const Graph g = Graph::build({{0, 0}, {1, 0}}, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
  GcnLayer layer("gcn", 1, 1, GcnVariant::vanilla, rng);
  layer.theta().value() = Matrix::Identity(1, 1);
  const Matrix out = run(layer, g, Matrix{{1.0}, {0.0}});
  CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gcn matches the dense formula on small random graphs") {
  std::mt19937_64 rng(42);
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + static_cast<std::size_t>(seed % 8);
    const Graph g = oracle::random_graph(n, 0.45, rng);
    const Matrix x = oracle::random_matrix(n, 3, rng);
    for (GcnVariant v : {GcnVariant::vanilla, GcnVariant::improved, GcnVariant::improved_weighted}) {
      GcnLayer layer("gcn", 3, 2, v, rng);
      const double s = v == GcnVariant::vanilla ? 1.0 : 2.0;
      const Matrix expected = oracle::dense_gcn(g, x, layer.theta().value(), s, v == GcnVariant::improved_weighted);
      worst = std::max(worst, max_abs_diff(run(layer, g, x), expected));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("gcn bias is added after propagation") {
  std::mt19937_64 rng(3);
  const Graph g = oracle::random_graph(5, 0.5, rng);
  GcnLayer layer("gcn", 2, 3, GcnVariant::improved, rng, true);
  REQUIRE(layer.bias() != nullptr);
  layer.bias()->value() = Matrix{{1.0, -2.0, 0.5}};
  const Matrix x = oracle::random_matrix(5, 2, rng);
  Matrix expected = oracle::dense_gcn(g, x, layer.theta().value(), 2.0, false);
  expected.rowwise() += layer.bias()->value().row(0);
  CHECK(max_abs_diff(run(layer, g, x), expected) < 1e-12);
}

TEST_CASE("gmm kernel weight values") {
  CHECK(gmm_kernel_weight(0.3, 0.7, 0.3) == 1.0);
  CHECK(gmm_kernel_weight(0.0, 1.0, 2.0) == doctest::Approx(0.135335).epsilon(1e-6));
  CHECK(gmm_kernel_weight(0.0, 4.0, 2.0) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK_THROWS_AS(gmm_kernel_weight(0.0, 0.0, 1.0), DataError);
}

TEST_CASE("gmm: single neighbour at the kernel mean copies it") {
  std::mt19937_64 rng(2);
  const Graph g = Graph::build({{0, 0}, {0.4, 0}}, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
  GmmLayer layer("gmm", 2, 2, 1, 0.4, rng, false);
  layer.theta(0).value() = Matrix::Identity(2, 2);
  layer.mu(0).value()(0, 0) = 0.4;
  const Matrix out = run(layer, g, Matrix{{1.0, 2.0}, {3.0, 4.0}});
  CHECK(max_abs_diff(out, Matrix{{3.0, 4.0}, {1.0, 2.0}}) < 1e-15);
}

TEST_CASE("gmm: two neighbours give the weighted mean") {
  std::mt19937_64 rng(2);
  // Star: node 0 joined to nodes 1 (distance 1) and 2 (distance 2).
  const Graph g = Graph::build({{0, 0}, {1, 0}, {0, 2}}, std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {0, 2}});
  GmmLayer layer("gmm", 1, 1, 1, 1.0, rng, false);
  layer.theta(0).value() = Matrix::Identity(1, 1);
  layer.mu(0).value()(0, 0) = 0.5;
  layer.set_variance(0, 0.8);
  CHECK(layer.variance(0) == doctest::Approx(0.8).epsilon(1e-12));
  const Matrix x{{0.0}, {3.0}, {-5.0}};
  const double wa = gmm_kernel_weight(0.5, 0.8, 1.0);
  const double wb = gmm_kernel_weight(0.5, 0.8, 2.0);
  const Matrix out = run(layer, g, x);
  CHECK(out(0, 0) == doctest::Approx((wa * 3.0 + wb * -5.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("gmm: two identical kernels equal one kernel") {
  std::mt19937_64 rng(6);
  const Graph g = oracle::random_graph(6, 0.6, rng);
  const Matrix x = oracle::random_matrix(6, 3, rng);
  GmmLayer one("one", 3, 3, 1, 0.3, rng);
  GmmLayer two("two", 3, 3, 2, 0.3, rng);
  for (std::size_t k = 0; k < 2; ++k) {
    two.theta(k).value() = Matrix::Identity(3, 3);
    two.mu(k).value() = one.mu(0).value();
    two.raw_variance(k).value() = one.raw_variance(0).value();
  }
  one.theta(0).value() = Matrix::Identity(3, 3);
  CHECK(max_abs_diff(run(one, g, x), run(two, g, x)) < 1e-14);
}

TEST_CASE("gmm with flat kernels and identity weights is the neighbour mean") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = oracle::random_graph(8, 0.4, rng);
    const Matrix x = oracle::random_matrix(8, 2, rng);
    GmmLayer layer("gmm", 2, 2, 1, 0.5, rng, true);
    layer.theta(0).value() = Matrix::Identity(2, 2);
    layer.set_variance(0, 1e300);  // w == 1 to double precision
    Matrix expected(8, 2);
    const Matrix a = oracle::dense_adjacency(g, false) + Matrix::Identity(8, 8);
    for (Eigen::Index i = 0; i < 8; ++i) expected.row(i) = a.row(i) * x / a.row(i).sum();
    CHECK(max_abs_diff(run(layer, g, x), expected) < 1e-12);
  }
}

TEST_CASE("gmm without self loops needs neighbours") {
  std::mt19937_64 rng(1);
  const Graph g = Graph::build({{0, 0}, {1, 0}, {2, 0}}, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
  GmmLayer layer("gmm", 1, 1, 1, 1.0, rng, false);
  CHECK_THROWS(run(layer, g, Matrix::Ones(3, 1)));
}

TEST_CASE("gmm initial kernels follow the edge scale") {
  std::mt19937_64 rng(1);
  GmmLayer layer("gmm", 4, 2, 3, 0.05, rng);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(layer.mu(k).value()(0, 0) == doctest::Approx(0.05));
    CHECK(layer.variance(k) == doctest::Approx(0.05 * 0.05).epsilon(1e-9));
  }
}

TEST_CASE("conv layers pass the gradient oracle") {
  std::mt19937_64 rng(11);
  const Graph g = oracle::random_graph(9, 0.4, rng);
  const Matrix x = oracle::random_matrix(9, 3, rng);
  const Matrix target = oracle::random_matrix(9, 2, rng);
  std::vector<std::unique_ptr<ConvLayer>> layers;
  layers.push_back(std::make_unique<GcnLayer>("v", 3, 2, GcnVariant::vanilla, rng, true));
  layers.push_back(std::make_unique<GcnLayer>("i", 3, 2, GcnVariant::improved, rng));
  layers.push_back(std::make_unique<GcnLayer>("w", 3, 2, GcnVariant::improved_weighted, rng));
  layers.push_back(std::make_unique<GmmLayer>("g1", 3, 2, 1, 0.3, rng, true, true));
  layers.push_back(std::make_unique<GmmLayer>("g3", 3, 2, 3, 0.3, rng));
  for (auto& layer : layers) {
    const auto params = layer->parameters();
    const GradCheckResult r = finite_diff_check(
        [&](Tape& t) { return ad::mse(layer->forward(t, g, t.constant(x)), t.constant(target)); }, params);
    CAPTURE(r.worst_parameter);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("conv layers are permutation equivariant") {
  std::mt19937_64 rng(13);
  const Graph g = oracle::random_graph(10, 0.4, rng);
  const Matrix x = oracle::random_matrix(10, 3, rng);
  const auto perm = oracle::random_permutation(10, rng);
  const Graph pg = oracle::permute_graph(g, perm);
  GcnLayer gcn("w", 3, 2, GcnVariant::improved_weighted, rng);
  GmmLayer gmm("g", 3, 2, 3, 0.3, rng);
  for (ConvLayer* layer : std::vector<ConvLayer*>{&gcn, &gmm}) {
    const Matrix out = run(*layer, g, x);
    const Matrix pout = run(*layer, pg, oracle::permute_rows(x, perm));
    CHECK(max_abs_diff(oracle::permute_rows(out, perm), pout) < 1e-12);
  }
}

TEST_CASE("conv rejects mismatched input") {
  std::mt19937_64 rng(1);
  const Graph g = oracle::chain(3);
  GcnLayer layer("gcn", 2, 2, GcnVariant::vanilla, rng);
  CHECK_THROWS_AS(run(layer, g, Matrix::Ones(4, 2)), ShapeError);
  CHECK_THROWS_AS(run(layer, g, Matrix::Ones(3, 3)), ShapeError);
}
