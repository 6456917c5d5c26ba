// Regularized continuity solve: validation, constant-state exactness, the
// mass rule, positivity, and the renormalization residual.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nnflow/corpus.hpp>
#include <nnflow/fields.hpp>
#include <nnflow/grid.hpp>
#include <nnflow/transport.hpp>

#include <cmath>

using namespace nnflow;

namespace {

template <int Dim>
VectorField<Dim> interior_velocity(const Grid<Dim>& g, std::uint64_t salt, double amp) {
  auto rng = corpus::seeded(salt);
  VectorField<Dim> v = corpus::random_trig_velocity(g, rng, 2, amp);
  for (int c = 0; c < g.cells(); ++c)
    if (g.on_boundary_ring(c)) v.v.row(c).setZero();
  return v;
}

} // namespace

TEST_CASE("validation: at least one zero-order term, check state when required") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  TransportProblem<2> p;
  p.grid = &g;
  p.eps = 0.1;
  p.eta = 0.0;
  p.alpha = 0.0;
  p.M = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument); // no eta, no alpha

  p.alpha = 0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument); // alpha > 0 needs rho_check

  p.rho_check = ScalarField<2>(g, 1.0);
  CHECK_NOTHROW(p.validate());

  p.rho_check->v[0] = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument); // check state must be nonnegative
}

TEST_CASE("wall-touching transport velocity is rejected on a rectangle") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  TransportProblem<2> p;
  p.grid = &g;
  p.eps = 0.1;
  p.eta = 0.3;
  p.M = 1.0;
  VectorField<2> w(g);
  w.v.setConstant(1.0); // nonzero on the boundary ring
  CHECK_THROWS_AS(solve_transport(p, w), std::invalid_argument);
}

TEST_CASE("zero velocity reproduces the constant state exactly") {
  const Grid<2> g({16, 16}, {1.0, 2.0});
  TransportProblem<2> p;
  p.grid = &g;
  p.eps = 0.05;
  p.M = 1.3;

  SUBCASE("eta branch") {
    p.eta = 0.4;
  }
  SUBCASE("alpha branch") {
    p.eta = 0.0;
    p.alpha = 0.7;
    p.rho_check = ScalarField<2>(g, p.M / g.volume());
  }
  SUBCASE("mixed") {
    p.eta = 0.2;
    p.alpha = 0.3;
    p.rho_check = ScalarField<2>(g, p.M / g.volume());
  }

  const VectorField<2> w(g); // zero
  TransportReport rep;
  const ScalarField<2> rho = solve_transport(p, w, &rep);
  const double target = p.M / g.volume();
  CHECK((rho.v - target).abs().maxCoeff() <= 1e-13 * target);
  CHECK(rep.min_rho == doctest::Approx(target).epsilon(1e-12));
  CHECK(rep.mass == doctest::Approx(p.M).epsilon(1e-12));
}

TEST_CASE("constant state is exact on a torus with constant velocity") {
  const Grid<2> g({12, 12}, {1.0, 1.0}, true);
  TransportProblem<2> p;
  p.grid = &g;
  p.eps = 0.02;
  p.eta = 0.5;
  p.M = 2.0;
  VectorField<2> w(g);
  w.v.col(0).setConstant(0.8);
  w.v.col(1).setConstant(-0.3);
  const ScalarField<2> rho = solve_transport(p, w);
  CHECK((rho.v - 2.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("mass rule: integral of the solution matches the zero-order balance") {
  const Grid<2> g({24, 24}, {1.0, 1.0});
  TransportProblem<2> p;
  p.grid = &g;
  p.eps = 0.08;
  p.eta = 0.3;
  p.alpha = 0.5;
  auto rng = corpus::seeded(59);
  ScalarField<2> chk = corpus::random_trig_scalar(g, rng, 2, 0.4, 1.2); // positive
  p.rho_check = chk;
  p.M = 2.0;

  const VectorField<2> w = interior_velocity<2>(g, 61, 0.6);
  TransportReport rep;
  const ScalarField<2> rho = solve_transport(p, w, &rep);
  const double expected = (p.eta * p.M + p.alpha * integral(chk)) / (p.eta + p.alpha);
  CHECK(rep.mass == doctest::Approx(expected).epsilon(1e-12));
  CHECK(integral(rho) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected_mass(p) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("frozen mass-rule value") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  TransportProblem<2> p;
  p.grid = &g;
  p.eps = 0.1;
  p.eta = 0.3;
  p.alpha = 0.5;
  p.M = 2.0;
  p.rho_check = ScalarField<2>(g, 1.2); // integral = 1.2
  CHECK(expected_mass(p) == doctest::Approx((0.3 * 2.0 + 0.5 * 1.2) / 0.8).epsilon(1e-15));
}

TEST_CASE("positivity and certified backward error on random data") {
  const Grid<2> g({20, 20}, {1.0, 1.0});
  for (std::uint64_t salt : {3u, 7u, 11u, 13u}) {
    TransportProblem<2> p;
    p.grid = &g;
    p.eps = 0.05;
    p.eta = 0.25;
    p.M = 1.0;
    const VectorField<2> w = interior_velocity<2>(g, salt, 0.8);
    TransportReport rep;
    const ScalarField<2> rho = solve_transport(p, w, &rep);
    CHECK(rho.v.minCoeff() >= 0.0); // M-matrix structure gives a positive solution
    CHECK(rep.min_rho == doctest::Approx(rho.v.minCoeff()).epsilon(1e-15));
    CHECK(rep.direct);
    CHECK(rep.rel_residual <= p.tol);
  }
}

TEST_CASE("3D transport: constant exactness and mass rule") {
  const Grid<3> g({8, 8, 8}, {1.0, 1.0, 1.0});
  TransportProblem<3> p;
  p.grid = &g;
  p.eps = 0.1;
  p.eta = 0.4;
  p.M = 1.5;
  const VectorField<3> w = interior_velocity<3>(g, 67, 0.5);
  TransportReport rep;
  const ScalarField<3> rho = solve_transport(p, w, &rep);
  CHECK(rep.mass == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rho.v.minCoeff() >= 0.0);
}

TEST_CASE("renormalization residual vanishes in the exactly-renormalized cases") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  auto rng = corpus::seeded(71);
  const ScalarField<2> rho = corpus::random_trig_scalar(g, rng, 2, 0.4, 1.0);
  const VectorField<2> u = interior_velocity<2>(g, 73, 0.7);

  RenormB b;
  b.theta = 1.7;

  SUBCASE("zero velocity") {
    const VectorField<2> zero(g);
    const ScalarField<2> phi = corpus::random_trig_scalar(g, rng, 2, 0.3, 1.0);
    CHECK(std::abs(renorm_residual(rho, zero, b, phi)) <= 1e-14);
  }
  SUBCASE("theta = 1 with constant test function kills both terms") {
    b.theta = 1.0;
    const ScalarField<2> phi(g, 1.0);
    // -rho u . grad(const) = 0 and (theta-1) = 0
    CHECK(std::abs(renorm_residual(rho, u, b, phi)) <= 1e-14);
  }

  ScalarField<2> neg = rho;
  neg.v[5] = -0.5;
  const ScalarField<2> phi(g, 1.0);
  CHECK_THROWS_AS(renorm_residual(neg, u, b, phi), std::invalid_argument);
}
