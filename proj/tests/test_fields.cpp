// Grid layout, field containers, discrete calculus (exactness on quadratics,
// summation by parts), norms, and the mollification/truncation pair.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nnflow/calculus.hpp>
#include <nnflow/corpus.hpp>
#include <nnflow/fields.hpp>
#include <nnflow/grid.hpp>
#include <nnflow/mollify.hpp>

#include <cmath>

using namespace nnflow;

TEST_CASE("grid: index/coords round trip and metric quantities") {
  const Grid<2> g({5, 7}, {2.0, 3.5});
  CHECK(g.cells() == 35);
  for (int c = 0; c < g.cells(); ++c) CHECK(g.index(g.coords(c)) == c);
  CHECK(g.h(0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(g.h(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.volume() == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(g.cell_volume() * g.cells() == doctest::Approx(g.volume()).epsilon(1e-14));
  const auto x = g.cell_center(g.index({2, 3}));
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx(1.75).epsilon(1e-15));

  const Grid<3> g3({4, 5, 6}, {1.0, 1.0, 2.0});
  for (int c = 0; c < g3.cells(); ++c) CHECK(g3.index(g3.coords(c)) == c);

  CHECK_THROWS_AS(Grid<2>({3, 5}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Grid<2>({5, 5}, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("grid: boundary ring and distance") {
  const Grid<2> g({6, 6}, {1.0, 1.0});
  int ring = 0;
  for (int c = 0; c < g.cells(); ++c)
    if (g.on_boundary_ring(c)) ++ring;
  CHECK(ring == 36 - 16);
  // first interior cell center sits 1.5 h from the wall
  CHECK(g.boundary_distance(g.index({1, 1})) == doctest::Approx(0.25).epsilon(1e-14));
  const Grid<2> torus({6, 6}, {1.0, 1.0}, true);
  for (int c = 0; c < torus.cells(); ++c) CHECK_FALSE(torus.on_boundary_ring(c));
}

TEST_CASE("symmetric storage order and Frobenius weighting") {
  CHECK(sym_index<2>(0, 0) == 0);
  CHECK(sym_index<2>(1, 1) == 1);
  CHECK(sym_index<2>(0, 1) == 2);
  CHECK(sym_index<2>(1, 0) == 2);
  CHECK(sym_index<3>(0, 1) == 3);
  CHECK(sym_index<3>(0, 2) == 4);
  CHECK(sym_index<3>(1, 2) == 5);

  const Grid<2> g({4, 4}, {1.0, 1.0});
  SymTensorField<2> T(g);
  Eigen::Matrix2d A;
  A << 0.0, 1.0, 1.0, 0.0;
  T.set(0, A);
  CHECK((T.at(0) - A).norm() == 0.0);
  CHECK(T.frob(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15)); // off-diagonal counts twice
}

TEST_CASE("discrete derivatives are exact on quadratics, boundary rows included") {
  const Grid<2> g({9, 11}, {1.3, 0.9});
  const auto f = sample_scalar<2>(g, [](const std::array<double, 2>& x) {
    return 1.0 + 2.0 * x[0] - 0.7 * x[1] + x[0] * x[0] + 3.0 * x[0] * x[1] - 2.0 * x[1] * x[1];
  });
  const VectorField<2> G = grad(f);
  for (int c = 0; c < g.cells(); ++c) {
    const auto x = g.cell_center(c);
    CHECK(G.v(c, 0) == doctest::Approx(2.0 + 2.0 * x[0] + 3.0 * x[1]).epsilon(1e-11));
    CHECK(G.v(c, 1) == doctest::Approx(-0.7 + 3.0 * x[0] - 4.0 * x[1]).epsilon(1e-11));
  }
}

TEST_CASE("divergence and sym_grad are exact on quadratic vector fields") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  const auto u = sample_vector<2>(g, [](const std::array<double, 2>& x) {
    return Eigen::Vector2d(x[0] * x[0] - x[1], 2.0 * x[0] * x[1]);
  });
  const ScalarField<2> div_u = divergence(u);
  const SymTensorField<2> Du = sym_grad(u);
  for (int c = 0; c < g.cells(); ++c) {
    const auto x = g.cell_center(c);
    CHECK(div_u.v[c] == doctest::Approx(2.0 * x[0] + 2.0 * x[0]).epsilon(1e-11));
    // D = sym([[2x, -1], [2y, 2x]])
    CHECK(Du.at(c)(0, 0) == doctest::Approx(2.0 * x[0]).epsilon(1e-11));
    CHECK(Du.at(c)(0, 1) == doctest::Approx(0.5 * (-1.0 + 2.0 * x[1])).epsilon(1e-11));
    CHECK(Du.at(c)(1, 1) == doctest::Approx(2.0 * x[0]).epsilon(1e-11));
  }
}

TEST_CASE("3D gradient exactness on an affine field") {
  const Grid<3> g({5, 4, 6}, {1.0, 2.0, 1.5});
  const auto f = sample_scalar<3>(
      g, [](const std::array<double, 3>& x) { return 2.0 - x[0] + 3.0 * x[1] + 0.5 * x[2]; });
  const VectorField<3> G = grad(f);
  for (int c = 0; c < g.cells(); ++c) {
    CHECK(G.v(c, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(G.v(c, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(G.v(c, 2) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("summation by parts with a three-cell collar") {
  const Grid<2> g({24, 24}, {1.0, 1.0});
  auto rng = corpus::seeded(31);
  VectorField<2> v = corpus::random_trig_velocity(g, rng, 3, 1.0);
  const double collar = 3.0 * g.h(0);
  for (int c = 0; c < g.cells(); ++c)
    if (g.boundary_distance(c) < collar) v.v.row(c).setZero();
  const ScalarField<2> f = corpus::random_trig_scalar(g, rng, 3, 1.0, 0.5);
  const double left = inner(divergence(v), f);
  const double right = -inner(v, grad(f));
  CHECK(left == doctest::Approx(right).epsilon(1e-11));
}

TEST_CASE("summation by parts on a torus needs no collar") {
  const Grid<2> g({16, 16}, {1.0, 1.0}, true);
  auto rng = corpus::seeded(37);
  const VectorField<2> v = corpus::random_trig_velocity(g, rng, 3, 1.0);
  const ScalarField<2> f = corpus::random_trig_scalar(g, rng, 3, 1.0);
  CHECK(inner(divergence(v), f) == doctest::Approx(-inner(v, grad(f))).epsilon(1e-11));
}

TEST_CASE("norms and integrals: closed forms on constant fields") {
  const Grid<2> g({8, 8}, {2.0, 0.5});
  const ScalarField<2> f(g, -3.0);
  CHECK(integral(f) == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK(lebesgue_norm(f, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(lebesgue_norm(f, 2.0) == doctest::Approx(3.0).epsilon(1e-14));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(lebesgue_norm(f, inf) == 3.0);
  CHECK_THROWS_AS(lebesgue_norm(f, 0.5), std::invalid_argument);

  VectorField<2> u(g);
  u.v.col(0).setConstant(3.0);
  u.v.col(1).setConstant(4.0);
  CHECK(lebesgue_norm(u, 2.0) == doctest::Approx(5.0).epsilon(1e-14)); // row norm 5 everywhere
  CHECK(lebesgue_norm(u, inf) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("sobolev norm of a linear ramp matches the closed form") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  const auto u = sample_vector<2>(
      g, [](const std::array<double, 2>& x) { return Eigen::Vector2d(x[1], 0.0); });
  // grad u has a single unit entry; |u| integrates x2^2 over the unit square
  const double expect_u2 = std::sqrt(g.cell_volume() * [&] {
    double acc = 0.0;
    for (int c = 0; c < g.cells(); ++c) acc += g.cell_center(c)[1] * g.cell_center(c)[1];
    return acc;
  }());
  const double s = sobolev_norm(u, 2.0);
  CHECK(s == doctest::Approx(std::sqrt(expect_u2 * expect_u2 + 1.0)).epsilon(1e-11));
}

TEST_CASE("grid mismatch is rejected by binary operations") {
  const Grid<2> a({8, 8}, {1.0, 1.0});
  const Grid<2> b({8, 8}, {2.0, 1.0});
  CHECK_THROWS_AS(inner(ScalarField<2>(a), ScalarField<2>(b)), std::invalid_argument);
}

TEST_CASE("mollifier: identity cases and normalization") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  auto rng = corpus::seeded(41);
  const ScalarField<2> f = corpus::random_trig_scalar(g, rng, 3, 1.0, 2.0);

  // delta = 0 and delta below the cell size degrade to the identity
  CHECK((mollify(f, 0.0).v - f.v).abs().maxCoeff() == 0.0);
  const MollifyKernel<2> sub(g, 0.4 * g.h(0));
  CHECK_FALSE(sub.resolvable);
  CHECK(sub.identity);

  // weights sum to one: constants are reproduced exactly away from the
  // zero-extension collar
  const ScalarField<2> c(g, 3.25);
  const ScalarField<2> cm = mollify(c, 0.13);
  for (int cell = 0; cell < g.cells(); ++cell)
    if (g.boundary_distance(cell) > 0.13)
      CHECK(cm.v[cell] == doctest::Approx(3.25).epsilon(1e-14));

  // max principle from the convex combination + zero extension
  const ScalarField<2> fm = mollify(f, 0.1);
  CHECK(fm.v.abs().maxCoeff() <= f.v.abs().maxCoeff() * (1.0 + 1e-14));
}

TEST_CASE("mollifier: vanishing first moment reproduces affine fields in the interior") {
  const Grid<2> g({20, 20}, {1.0, 1.0});
  const auto f = sample_scalar<2>(
      g, [](const std::array<double, 2>& x) { return 1.0 + 2.0 * x[0] - 3.0 * x[1]; });
  const double delta = 0.15;
  const ScalarField<2> fm = mollify(f, delta);
  for (int c = 0; c < g.cells(); ++c)
    if (g.boundary_distance(c) > delta)
      CHECK(fm.v[c] == doctest::Approx(f.v[c]).epsilon(1e-12));
}

TEST_CASE("mollifier preserves mass on a torus") {
  const Grid<2> g({16, 16}, {1.0, 1.0}, true);
  auto rng = corpus::seeded(43);
  const ScalarField<2> f = corpus::random_trig_scalar(g, rng, 3, 1.0, 2.0);
  CHECK(integral(mollify(f, 0.2)) == doctest::Approx(integral(f)).epsilon(1e-13));
}

TEST_CASE("truncation: indicator of the 2-delta interior, bitwise elsewhere") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  auto rng = corpus::seeded(47);
  const ScalarField<2> f = corpus::random_trig_scalar(g, rng, 3, 1.0, 1.0);
  const double delta = 0.1;
  const ScalarField<2> t = truncate(f, delta);
  for (int c = 0; c < g.cells(); ++c) {
    if (g.boundary_distance(c) >= 2.0 * delta) CHECK(t.v[c] == f.v[c]);
    else CHECK(t.v[c] == 0.0);
  }
  CHECK_THROWS_AS(truncate(f, -0.1), std::invalid_argument);
}

TEST_CASE("zero extension onto a padded grid embeds values in place") {
  const Grid<2> g({6, 6}, {1.0, 1.0});
  const Grid<2> big = padded_grid(g, 2);
  CHECK(big.n[0] == 10);
  CHECK(big.h(0) == doctest::Approx(g.h(0)).epsilon(1e-15));
  ScalarField<2> f(g);
  f.v.setConstant(1.0);
  const ScalarField<2> e = extend_zero(f, big);
  CHECK(integral(e) == doctest::Approx(integral(f)).epsilon(1e-14));
  CHECK(e.v[big.index({0, 0})] == 0.0);
  CHECK(e.v[big.index({2, 2})] == 1.0);
}

TEST_CASE("boundary-ring projection zeroes exactly the ring") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  VectorField<2> u(g);
  u.v.setConstant(1.0);
  zero_boundary_ring(u);
  for (int c = 0; c < g.cells(); ++c) {
    if (g.on_boundary_ring(c)) CHECK(u.v.row(c).norm() == 0.0);
    else CHECK(u.v.row(c).norm() > 0.0);
  }
}
