// Pointwise material laws: stress tensors, their convex potentials, the
// regularized yield coefficient, and the exponent-admissibility calculus.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nnflow/constitutive.hpp>
#include <nnflow/corpus.hpp>

#include <cmath>

using namespace nnflow;

namespace {

// central finite difference of a scalar functional of a matrix along B
template <int D, typename Pot>
double fd_directional(const Eigen::Matrix<double, D, D>& A, const Eigen::Matrix<double, D, D>& B,
                      Pot&& pot, double h) {
  return (pot(A + h * B) - pot(A - h * B)) / (2.0 * h);
}

} // namespace

TEST_CASE("power-law stress: r = 2 is the linear law") {
  const PowerLawParams p{2.5, 0.7, 2.0};
  auto rng = corpus::seeded(11);
  for (int k = 0; k < 50; ++k) {
    const auto A = corpus::random_sym<3>(rng, 2.0);
    const Eigen::Matrix3d S = stress_power_law(A, p);
    const Eigen::Matrix3d lin = p.mu0 * A + p.lambda0 * A.trace() * Eigen::Matrix3d::Identity();
    CHECK((S - lin).norm() <= 1e-14 * (1.0 + lin.norm()));
  }
}

TEST_CASE("power-law stress: S(0) = 0 exactly, shear-thinning included") {
  for (const double r : {1.6, 2.0, 2.8}) {
    const PowerLawParams p{1.0, 0.5, r};
    const Eigen::Matrix2d S = stress_power_law(Eigen::Matrix2d::Zero().eval(), p);
    CHECK(S.norm() == 0.0);
  }
}

TEST_CASE("power-law stress: pairing identity S(A):A = mu0 |A|^r at lambda0 = 0") {
  auto rng = corpus::seeded(13);
  for (const double r : {1.7, 2.6}) {
    const PowerLawParams p{1.3, 0.0, r};
    for (int k = 0; k < 50; ++k) {
      const auto A = corpus::random_sym<2>(rng, 1.5);
      const double pair = (stress_power_law(A, p).array() * A.array()).sum();
      const double expect = p.mu0 * std::pow(A.norm(), r);
      CHECK(pair == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("power-law stress is the gradient of its potential") {
  auto rng = corpus::seeded(17);
  for (const double r : {1.7, 2.0, 2.6}) {
    const PowerLawParams p{1.0, 0.4, r};
    for (int k = 0; k < 20; ++k) {
      Eigen::Matrix3d A = corpus::random_sym<3>(rng, 1.0);
      if (A.norm() < 0.3) A += 0.5 * Eigen::Matrix3d::Identity(); // keep away from the kink at 0
      const Eigen::Matrix3d B = corpus::random_sym<3>(rng, 1.0);
      const Eigen::Matrix3d S = stress_power_law(A, p);
      const double analytic = (S.array() * B.array()).sum();
      const double fd = fd_directional<3>(
          A, B, [&](const Eigen::Matrix3d& M) { return stress_power_law_potential(M, p); }, 1e-6);
      CHECK(analytic == doctest::Approx(fd).epsilon(5e-7));
    }
  }
}

TEST_CASE("power-law stress: monotone in the tensor argument") {
  auto rng = corpus::seeded(19);
  for (const double r : {1.6, 2.0, 3.1}) {
    const PowerLawParams p{1.0, 0.6, r};
    double worst = 0.0;
    for (int k = 0; k < 300; ++k) {
      const auto A = corpus::random_sym<3>(rng, 2.0);
      const auto B = corpus::random_sym<3>(rng, 2.0);
      const Eigen::Matrix3d dS = stress_power_law(A, p) - stress_power_law(B, p);
      worst = std::min(worst, (dS.array() * (A - B).array()).sum());
    }
    CHECK(worst >= 0.0); // zero tolerance: convex potential
  }
}

TEST_CASE("pressure law: power evaluation and domain guard") {
  const PressureLaw law{1.5, 2.0};
  CHECK(pressure(0.0, law) == 0.0);
  CHECK(pressure(2.0, law) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(pressure(3.0, PressureLaw{2.0, 3.0}) == doctest::Approx(54.0).epsilon(1e-15));
  CHECK_THROWS_AS(pressure(-0.1, law), std::invalid_argument);
}

TEST_CASE("yield coefficient g_eps: plateau, tail, and pointwise envelope") {
  for (const double eps : {1.0, 0.1, 0.01}) {
    CHECK(g_eps(0.0, eps) == 1.0 / eps);
    CHECK(g_eps(0.5 * eps, eps) == 1.0 / eps);
    CHECK(g_eps(1.5 * eps, eps) == 1.0 / (1.5 * eps));
    CHECK(g_eps(10.0 * eps, eps) == 0.1 / eps);
    // envelope g <= min(1/eps, 1/s) holds exactly, blend segment included
    for (int k = 0; k <= 400; ++k) {
      const double s = 2.5 * eps * k / 400.0;
      const double v = g_eps(s, eps);
      CHECK(v <= 1.0 / eps);
      if (s > 0.0) CHECK(v <= 1.0 / s);
    }
  }
  CHECK_THROWS_AS(g_eps(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(g_eps(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("yield coefficient g_eps: non-increasing with bounded slope") {
  const double eps = 0.1;
  const double slope_floor = -4.0 / (9.0 * eps * eps);
  double prev = g_eps(0.0, eps);
  const int n = 4000;
  const double ds = 3.0 * eps / n;
  for (int k = 1; k <= n; ++k) {
    const double v = g_eps(k * ds, eps);
    const double slope = (v - prev) / ds;
    CHECK(v <= prev + 1e-15 / eps);               // monotone
    CHECK(slope >= slope_floor * (1.0 + 1e-6));   // mean-value slope bound
    prev = v;
  }
}

TEST_CASE("yield potential: derivative is s g_eps(s), linear tail exact") {
  const double eps = 0.2;
  CHECK(g_eps_potential(0.0, eps) == 0.0);
  for (const double s : {0.05, 0.1, 0.15, 0.25, 0.29, 0.5, 1.0}) {
    const double fd = (g_eps_potential(s + 1e-7, eps) - g_eps_potential(s - 1e-7, eps)) / 2e-7;
    CHECK(fd == doctest::Approx(s * g_eps(s, eps)).epsilon(1e-6));
  }
  // beyond the blend the potential grows with unit slope exactly
  const double base = g_eps_potential(1.5 * eps, eps);
  CHECK(g_eps_potential(1.5 * eps + 2.0, eps) == doctest::Approx(base + 2.0).epsilon(1e-15));
}

TEST_CASE("regularized yield stress: P-part bound, saturation, and dissipation sign") {
  const HBRegParams p{0.8, 1.0, 1.8, 0.05};
  auto rng = corpus::seeded(23);
  for (int k = 0; k < 500; ++k) {
    const auto A = corpus::random_sym<2>(rng, 3.0);
    const auto S = stress_hb_reg(A, p);
    CHECK(S.p_part.norm() <= p.tau_star * (1.0 + 1e-14));
    CHECK((S.p_part.array() * A.array()).sum() >= 0.0);
    if (A.norm() >= 1.5 * p.eps_reg) // saturated branch: |P| = tau* exactly
      CHECK(S.p_part.norm() == doctest::Approx(p.tau_star).epsilon(1e-14));
  }
}

TEST_CASE("regularized yield stress is the gradient of its potential") {
  const HBRegParams p{0.5, 1.2, 1.8, 0.1};
  auto rng = corpus::seeded(29);
  for (int k = 0; k < 20; ++k) {
    Eigen::Matrix2d A = corpus::random_sym<2>(rng, 1.0);
    if (A.norm() < 0.3) A += 0.4 * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d B = corpus::random_sym<2>(rng, 1.0);
    const double analytic = (stress_hb_reg(A, p).total.array() * B.array()).sum();
    const double fd = fd_directional<2>(
        A, B, [&](const Eigen::Matrix2d& M) { return hb_potential(M, p); }, 1e-6);
    CHECK(analytic == doctest::Approx(fd).epsilon(5e-6));
  }
}

TEST_CASE("admissibility: frozen decision table") {
  // subcritical branch, d = 3, r = 2: gamma must exceed 3
  auto rep = admissible(3, 2.0, 3.5);
  CHECK(rep.admissible);
  CHECK(rep.branch == "subcritical");
  CHECK(rep.r_lower == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(rep.gamma_lower == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(rep.q1_star == doctest::Approx(42.0 / 13.0).epsilon(1e-13)); // 3.2307692...
  CHECK(rep.q2_star == doctest::Approx(2.1).epsilon(1e-13));
  CHECK_FALSE(rep.open_ended);

  CHECK_FALSE(admissible(3, 2.0, 3.0).admissible); // boundary value excluded

  // large-r branch, open-ended at r = d
  rep = admissible(2, 2.0, 1.01);
  CHECK(rep.admissible);
  CHECK(rep.branch == "large-r");
  CHECK(rep.open_ended);
  CHECK(rep.q1_star == doctest::Approx(2.02).epsilon(1e-13));

  rep = admissible(3, 3.2, 1.5);
  CHECK(rep.admissible);
  CHECK_FALSE(rep.open_ended);
  CHECK(rep.q1_star == doctest::Approx(3.2 * 1.5 / 2.2).epsilon(1e-13));

  // below the universal floor r <= 3d/(d+2) nothing is admissible
  CHECK(admissible(3, 1.8, 10.0).branch == "none");
  CHECK(admissible(2, 1.5, 10.0).branch == "none");
  CHECK_FALSE(admissible(3, 1.8, 10.0).admissible);

  CHECK_THROWS_AS(admissible(4, 2.0, 2.0), std::invalid_argument);
}

TEST_CASE("dual exponents: guarded accessor throws outside the admissible set") {
  CHECK_THROWS_AS(dual_exponents(3, 2.0, 2.0), std::invalid_argument);
  const DualExponents q = dual_exponents(3, 2.0, 3.5);
  CHECK(q.q1 == doctest::Approx(42.0 / 13.0).epsilon(1e-13));
  CHECK(q.q2 == doctest::Approx(2.1).epsilon(1e-13));
}

TEST_CASE("parameter validation guards") {
  CHECK_THROWS_AS(PowerLawParams{0.0, 0.0, 2.0}.validate(), std::invalid_argument);
  CHECK_THROWS_AS((PowerLawParams{1.0, -0.1, 2.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((PowerLawParams{1.0, 0.0, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((PressureLaw{1.0, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HBRegParams{-0.1, 1.0, 2.0, 0.1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HBRegParams{1.0, 1.0, 2.0, 0.0}).validate(), std::invalid_argument);
}
