// Momentum stage: exactness of the energy gradient, solver invariants
// (Dirichlet ring, energy descent, initialization independence), closed-form
// oracles for the assembled right-hand side, and the weak-residual battery.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nnflow/constitutive.hpp>
#include <nnflow/corpus.hpp>
#include <nnflow/fields.hpp>
#include <nnflow/grid.hpp>
#include <nnflow/momentum.hpp>

#include <cmath>

using namespace nnflow;

namespace {

// random interior velocity in dof space so the Dirichlet ring is exact
template <int Dim>
VectorField<Dim> random_dofs(const MomentumOperator<Dim>& op, std::uint64_t salt, double amp) {
  auto rng = corpus::seeded(salt);
  std::normal_distribution<double> n(0.0, amp);
  Eigen::VectorXd x(op.ndofs());
  for (int i = 0; i < op.ndofs(); ++i) x[i] = n(rng);
  return op.unflatten(x);
}

template <int Dim>
void check_gradient_fd(const MomentumProblem<Dim>& p, std::uint64_t salt) {
  const Grid<Dim>& g = *p.grid;
  MomentumOperator<Dim> op(g);
  const VectorField<Dim> u = random_dofs(op, salt, 0.5);
  const VectorField<Dim> F = random_dofs(op, salt + 1, 1.0);
  const Eigen::VectorXd grad = momentum_gradient(p, op, u, F);
  const Eigen::VectorXd xu = op.flatten(u);

  auto rng = corpus::seeded(salt + 2);
  std::normal_distribution<double> n(0.0, 1.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd d(op.ndofs());
    for (int i = 0; i < op.ndofs(); ++i) d[i] = n(rng);
    d.normalize();
    const double plus = momentum_energy(p, op, op.unflatten(xu + h * d), F);
    const double minus = momentum_energy(p, op, op.unflatten(xu - h * d), F);
    const double fd = (plus - minus) / (2.0 * h);
    const double an = grad.dot(d);
    CHECK(std::abs(fd - an) <= 2e-5 * (1.0 + std::abs(an)));
  }
}

} // namespace

TEST_CASE("problem validation rejects inconsistent configurations") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  const Grid<2> torus({8, 8}, {1.0, 1.0}, true);
  MomentumProblem<2> p;
  p.grid = &torus;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument); // Dirichlet needs a rectangle

  p.grid = &g;
  CHECK_NOTHROW(p.validate());

  p.alpha = 0.5;
  p.q = 2.0; // must exceed the dimension
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.q = 4.0;
  CHECK_NOTHROW(p.validate());

  p.beta = 0.3; // zeroth-order term needs a frozen density
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.rho_frozen = ScalarField<2>(g, 1.0);
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("energy gradient matches central finite differences") {
  const Grid<2> g({8, 8}, {1.0, 1.0});

  SUBCASE("shear-thickening power law with bulk part and gradient penalty") {
    MomentumProblem<2> p;
    p.grid = &g;
    p.power = {1.0, 0.4, 2.6};
    p.alpha = 0.3;
    p.q = 4.1;
    check_gradient_fd(p, 101);
  }
  SUBCASE("regularized yield-stress law with zeroth-order term") {
    MomentumProblem<2> p;
    p.grid = &g;
    p.kind = StressKind::herschel_bulkley;
    p.hb = {0.3, 1.0, 2.2, 0.05};
    p.beta = 0.7;
    p.rho_frozen = ScalarField<2>(g, 1.2);
    check_gradient_fd(p, 103);
  }
  SUBCASE("3D power law") {
    const Grid<3> g3({6, 6, 6}, {1.0, 1.0, 1.0});
    MomentumProblem<3> p;
    p.grid = &g3;
    p.power = {1.0, 0.0, 2.4};
    check_gradient_fd(p, 107);
  }
}

TEST_CASE("zero forcing yields the zero velocity immediately") {
  const Grid<2> g({12, 12}, {1.0, 1.0});
  MomentumProblem<2> p;
  p.grid = &g;
  p.power = {1.0, 0.2, 2.6};
  const VectorField<2> F(g), u0(g);
  MomentumReport rep;
  const VectorField<2> u = solve_momentum(p, F, u0, &rep);
  CHECK(rep.converged);
  CHECK(u.v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solver output honors the homogeneous Dirichlet ring exactly") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  MomentumProblem<2> p;
  p.grid = &g;
  p.power = {1.0, 0.0, 2.0};
  auto rng = corpus::seeded(109);
  const VectorField<2> F = corpus::random_trig_velocity(g, rng, 2, 1.0);
  MomentumReport rep;
  const VectorField<2> u = solve_momentum(p, F, VectorField<2>(g), &rep);
  CHECK(rep.converged);
  for (int c = 0; c < g.cells(); ++c)
    if (g.on_boundary_ring(c)) CHECK(u.v.row(c).norm() == 0.0);
  CHECK(lebesgue_norm(u, 2.0) > 0.0);
}

TEST_CASE("solution is independent of the initial iterate") {
  const Grid<2> g({12, 12}, {1.0, 1.0});
  MomentumProblem<2> p;
  p.grid = &g;
  p.power = {1.0, 0.1, 2.5};
  p.tol = 1e-11;
  auto rng = corpus::seeded(113);
  const VectorField<2> F = corpus::random_trig_velocity(g, rng, 2, 1.0);
  MomentumOperator<2> op(g);
  const VectorField<2> a = solve_momentum(p, F, VectorField<2>(g));
  const VectorField<2> b = solve_momentum(p, F, random_dofs(op, 127, 0.5));
  VectorField<2> diff(g);
  diff.v = a.v - b.v;
  CHECK(lebesgue_norm(diff, 2.0) <= 1e-6 * (1.0 + lebesgue_norm(a, 2.0)));
}

TEST_CASE("line-searched iteration never increases the energy") {
  const Grid<2> g({12, 12}, {1.0, 1.0});
  for (double r : {1.7, 2.0, 2.6, 3.2}) {
    MomentumProblem<2> p;
    p.grid = &g;
    p.power = {1.0, 0.3, r};
    auto rng = corpus::seeded(131 + static_cast<std::uint64_t>(10 * r));
    const VectorField<2> F = corpus::random_trig_velocity(g, rng, 2, 1.0);
    MomentumReport rep;
    solve_momentum(p, F, VectorField<2>(g), &rep);
    CHECK(rep.converged);
    CHECK(rep.energy_monotone);
    for (std::size_t i = 1; i < rep.energy_trace.size(); ++i)
      CHECK(rep.energy_trace[i] <= rep.energy_trace[i - 1] + 1e-12 * std::abs(rep.energy_trace[i - 1]));
  }
}

TEST_CASE("assembled right-hand side: constant density, affine velocity") {
  const Grid<2> g({12, 12}, {1.0, 1.0});
  const double c = 1.4;
  const ScalarField<2> rho(g, c);
  Eigen::Matrix2d G;
  G << 0.5, -0.3, 0.2, 0.8;
  const Eigen::Vector2d b(0.3, -0.1);
  const auto v = sample_vector<2>(g, [&](const std::array<double, 2>& x) {
    return (b + G * Eigen::Vector2d(x[0], x[1])).eval();
  });
  FAssemblyInputs<2> in;
  in.eps = 0.3; // no density gradient, so the coupling term must vanish
  in.eta = 0.25;
  in.delta = 0.0;
  in.pressure = {1.5, 2.0};
  VectorField<2> f(g), g_force(g);
  f.v.col(0).setConstant(0.7);
  f.v.col(1).setConstant(-0.2);
  g_force.v.col(0).setConstant(-0.05);
  g_force.v.col(1).setConstant(0.15);

  const VectorField<2> F = assemble_F(rho, v, in, f, g_force);
  const double trG = G.trace();
  for (int cell = 0; cell < g.cells(); ++cell) {
    const auto x = g.cell_center(cell);
    const Eigen::Vector2d vx = b + G * Eigen::Vector2d(x[0], x[1]);
    const Eigen::Vector2d conv = c * (trG * vx + G * vx);
    for (int i = 0; i < 2; ++i) {
      const double expect =
          -conv[i] - 0.5 * in.eta * c * vx[i] + c * f.v(cell, i) + g_force.v(cell, i);
      CHECK(F.v(cell, i) == doctest::Approx(expect).epsilon(1e-11));
    }
  }
}

TEST_CASE("assembled right-hand side: affine density, constant velocity") {
  const Grid<2> g({12, 12}, {1.0, 1.0});
  const double a0 = 1.0, a1 = 0.5;
  const auto rho =
      sample_scalar<2>(g, [&](const std::array<double, 2>& x) { return a0 + a1 * x[0]; });
  const Eigen::Vector2d V(0.6, -0.4);
  VectorField<2> v(g);
  v.v.col(0).setConstant(V[0]);
  v.v.col(1).setConstant(V[1]);
  FAssemblyInputs<2> in;
  in.eps = 0.2; // velocity gradient vanishes, so again no coupling term
  in.eta = 0.3;
  in.pressure = {1.3, 2.0}; // quadratic law keeps the pressure gradient exact
  const VectorField<2> f(g), g_force(g);

  const VectorField<2> F = assemble_F(rho, v, in, f, g_force);
  for (int cell = 0; cell < g.cells(); ++cell) {
    const double r = rho.v[cell];
    const Eigen::Vector2d conv = V * (V[0] * a1);
    const Eigen::Vector2d press(2.0 * in.pressure.a * a1 * r, 0.0);
    for (int i = 0; i < 2; ++i) {
      const double expect = -conv[i] - press[i] - 0.5 * in.eta * r * V[i];
      CHECK(F.v(cell, i) == doctest::Approx(expect).epsilon(1e-11));
    }
  }
}

TEST_CASE("artificial-diffusion coupling enters linearly with the advertised sign") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  auto rng = corpus::seeded(139);
  const ScalarField<2> rho = corpus::random_trig_scalar(g, rng, 2, 0.3, 1.0);
  const VectorField<2> v = corpus::random_trig_velocity(g, rng, 2, 0.8);
  const VectorField<2> f(g), g_force(g);
  FAssemblyInputs<2> in;
  in.eta = 0.4;
  in.pressure = {1.0, 1.8};

  in.eps = 0.0;
  const VectorField<2> F0 = assemble_F(rho, v, in, f, g_force);
  in.eps = 0.4;
  const VectorField<2> F1 = assemble_F(rho, v, in, f, g_force);

  const VectorField<2> grho = grad(rho);
  const TensorField<2> gv = grad_tensor(v);
  for (int cell = 0; cell < g.cells(); ++cell)
    for (int i = 0; i < 2; ++i) {
      double cross = 0.0;
      for (int j = 0; j < 2; ++j) cross += gv.v(cell, i * 2 + j) * grho.v(cell, j);
      CHECK(F1.v(cell, i) - F0.v(cell, i) == doctest::Approx(-0.4 * cross).epsilon(1e-10));
    }
}

TEST_CASE("negative density is rejected by the assembly") {
  const Grid<2> g({8, 8}, {1.0, 1.0});
  ScalarField<2> rho(g, 1.0);
  rho.v[3] = -0.1;
  const VectorField<2> v(g), f(g), g_force(g);
  FAssemblyInputs<2> in;
  in.pressure = {1.0, 2.0};
  CHECK_THROWS_AS(assemble_F(rho, v, in, f, g_force), std::invalid_argument);
}

TEST_CASE("sine battery: cardinality, Dirichlet ring, nontriviality") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  const auto battery = make_sine_battery(g, 2);
  CHECK(battery.size() == 2 * 2 * 2); // modes {1,2}^2 x 2 components
  for (const auto& psi : battery) {
    for (int c = 0; c < g.cells(); ++c)
      if (g.on_boundary_ring(c)) CHECK(psi.v.row(c).norm() == 0.0);
    CHECK(lebesgue_norm(psi, 2.0) > 0.0);
  }
  const Grid<3> g3({8, 8, 8}, {1.0, 1.0, 1.0});
  CHECK(make_sine_battery(g3, 2).size() == 8 * 3);
}

TEST_CASE("weak residual vanishes identically on the trivial state") {
  const Grid<2> g({16, 16}, {1.0, 1.0});
  const ScalarField<2> rho(g, 1.0);
  const VectorField<2> u(g), f(g), g_force(g);
  MomentumProblem<2> mp;
  mp.grid = &g;
  mp.power = {1.0, 0.0, 2.3};
  const PressureLaw plaw{1.0, 2.0};
  const auto battery = make_sine_battery(g, 2);
  const WeakResidualResult res = weak_momentum_residual(rho, u, mp, plaw, f, g_force, battery);
  CHECK(res.per_test.size() == battery.size());
  CHECK(res.max_normalized <= 1e-13);
}
