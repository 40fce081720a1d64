#include <doctest.h>

#include <cmath>
#include <random>

#include "meshflow/gradcheck.hpp"
#include "meshflow/norm.hpp"
#include "oracles.hpp"

using namespace meshflow;

namespace {

Matrix run(NormLayer& layer, const Matrix& x) {
  Tape tape(false);
  return layer.forward(tape, tape.constant(x)).value();
}

constexpr double kEps = NormLayer::kEpsilon;

}  // namespace

TEST_CASE("layer norm examples") {
  NormLayer ln("ln", NormKind::layer, 3);
  CHECK(run(ln, Matrix{{2.5, 2.5, 2.5}}) == Matrix::Zero(1, 3));

  NormLayer two("ln2", NormKind::layer, 2);
  const Matrix out = run(two, Matrix{{1.0, 3.0}});
  const double s = 1.0 / std::sqrt(1.0 + kEps);
  CHECK(out(0, 0) == doctest::Approx(-s).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(s).epsilon(1e-15));

  two.gamma()->value().setZero();
  two.beta()->value() = Matrix{{0.25, -4.0}};
  CHECK(run(two, Matrix{{1.0, 3.0}, {-7.0, 2.0}}) == Matrix{{0.25, -4.0}, {0.25, -4.0}});
}

TEST_CASE("graph norm examples") {
  NormLayer gn("gn", NormKind::graph, 1);
  const Matrix centred = run(gn, Matrix{{1.0}, {3.0}});
  CHECK(centred(0, 0) == doctest::Approx(-1.0 / std::sqrt(1.0 + kEps)).epsilon(1e-15));
  CHECK(centred(1, 0) == doctest::Approx(1.0 / std::sqrt(1.0 + kEps)).epsilon(1e-15));

  gn.alpha()->value().setZero();
  const Matrix raw = run(gn, Matrix{{1.0}, {3.0}});
  CHECK(raw(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0 + kEps)).epsilon(1e-15));
  CHECK(raw(1, 0) == doctest::Approx(3.0 / std::sqrt(5.0 + kEps)).epsilon(1e-15));
  CHECK(raw(0, 0) == doctest::Approx(0.4472).epsilon(1e-4));
  CHECK(raw(1, 0) == doctest::Approx(1.3416).epsilon(1e-4));

  NormLayer single("gn1", NormKind::graph, 2);
  single.beta()->value() = Matrix{{0.5, -1.5}};
  CHECK(run(single, Matrix{{4.0, 9.0}}) == Matrix{{0.5, -1.5}});
}

TEST_CASE("norm layers match the direct formulas") {
  std::mt19937_64 rng(21);
  double worst_ln = 0.0, worst_gn = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    const std::size_t n = 1 + static_cast<std::size_t>(seed % 8);
    const std::size_t f = 1 + static_cast<std::size_t>((seed / 8) % 5);
    const Matrix x = oracle::random_matrix(n, f, rng, 2.0);
    NormLayer ln("ln", NormKind::layer, f);
    NormLayer gn("gn", NormKind::graph, f);
    for (NormLayer* layer : {&ln, &gn}) {
      layer->gamma()->value() = oracle::random_matrix(1, f, rng);
      layer->beta()->value() = oracle::random_matrix(1, f, rng);
    }
    gn.alpha()->value() = oracle::random_matrix(1, f, rng);
    const Matrix ref_ln = oracle::ref_layer_norm(x, ln.gamma()->value(), ln.beta()->value(), kEps);
    const Matrix ref_gn =
        oracle::ref_graph_norm(x, gn.gamma()->value(), gn.beta()->value(), gn.alpha()->value(), kEps);
    worst_ln = std::max(worst_ln, (run(ln, x) - ref_ln).cwiseAbs().maxCoeff());
    worst_gn = std::max(worst_gn, (run(gn, x) - ref_gn).cwiseAbs().maxCoeff());
  }
  CHECK(worst_ln < 1e-12);
  CHECK(worst_gn < 1e-12);
}

TEST_CASE("standardised statistics") {
  std::mt19937_64 rng(4);
  const Matrix x = oracle::random_matrix(12, 5, rng, 3.0);
  NormLayer ln("ln", NormKind::layer, 5);
  const Matrix y = run(ln, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean_in = x.row(i).mean();
    const double var_in = (x.row(i).array() - mean_in).square().mean();
    const double mean = y.row(i).mean();
    const double var = (y.row(i).array() - mean).square().mean();
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(var - var_in / (var_in + kEps)) <= 1e-6);
  }
  NormLayer gn("gn", NormKind::graph, 5);
  const Matrix z = run(gn, x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) CHECK(std::abs(z.col(j).mean()) <= 1e-10);
}

TEST_CASE("none is the exact identity and has no parameters") {
  std::mt19937_64 rng(1);
  NormLayer none("none", NormKind::none, 3);
  const Matrix x = oracle::random_matrix(4, 3, rng);
  CHECK(run(none, x) == x);
  CHECK(none.parameters().empty());
  CHECK(none.gamma() == nullptr);
}

TEST_CASE("norm parameter layout and initial values") {
  NormLayer ln("ln", NormKind::layer, 4);
  CHECK(ln.parameters().size() == 2);
  CHECK(ln.alpha() == nullptr);
  NormLayer gn("gn", NormKind::graph, 4);
  CHECK(gn.parameters().size() == 3);
  CHECK(gn.gamma()->value() == Matrix::Ones(1, 4));
  CHECK(gn.beta()->value() == Matrix::Zero(1, 4));
  CHECK(gn.alpha()->value() == Matrix::Ones(1, 4));
}

TEST_CASE("norm layers pass the gradient oracle") {
  std::mt19937_64 rng(31);
  Parameter x("x", oracle::random_matrix(7, 4, rng));
  const Matrix w = oracle::random_matrix(7, 4, rng);
  for (NormKind kind : {NormKind::layer, NormKind::graph}) {
    NormLayer layer("n", kind, 4);
    layer.gamma()->value() = oracle::random_matrix(1, 4, rng);
    layer.beta()->value() = oracle::random_matrix(1, 4, rng);
    if (layer.alpha()) layer.alpha()->value() = oracle::random_matrix(1, 4, rng);
    std::vector<Parameter*> ps = layer.parameters();
    ps.push_back(&x);
    const GradCheckResult r = finite_diff_check(
        [&](Tape& t) { return ad::sum(ad::mul(layer.forward(t, t.param(x)), t.constant(w))); }, ps);
    CAPTURE(r.worst_parameter);
    CHECK(r.max_relative_error < 1e-6);
  }
}
