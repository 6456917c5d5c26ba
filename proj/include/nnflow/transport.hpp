#pragma once

// Regularized steady continuity equation on the cell-centered grid:
//
//   -eps Lap rho + eta (rho - M/|Omega|) + alpha rho + div(rho v) = alpha rho_check
//
// with homogeneous Neumann flux for the diffusion and first-order upwind
// fluxes for the convection (finite-volume, conservative).  The matrix is an
// M-matrix, so rho >= 0 up to factorization roundoff, and summing the
// equation over cells telescopes the fluxes away, which pins the mass:
//
//   integral(rho) = (eta M + alpha integral(rho_check)) / (eta + alpha).
//
// The linear system is solved by direct sparse LU; grids beyond 128^2 per
// axis fall back to BiCGSTAB with an ILU preconditioner.

#include "nnflow/calculus.hpp"
#include "nnflow/fields.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <optional>
#include <vector>

namespace nnflow {

template <int Dim> struct TransportProblem {
  const Grid<Dim>* grid = nullptr;
  double eps = 1e-2;  // artificial diffusion, > 0
  double eta = 1.0;   // mean-reversion coefficient, >= 0
  double alpha = 0.0; // zeroth-order coefficient of the source branch, >= 0
  double M = 1.0;     // target total mass for the eta branch, > 0 when eta > 0
  std::optional<ScalarField<Dim>> rho_check; // source density, required when alpha > 0
  double tol = 1e-12; // relative residual bound for the linear solve

  void validate() const {
    if (grid == nullptr) throw std::invalid_argument("TransportProblem: missing grid");
    if (!(eps > 0.0)) throw std::invalid_argument("TransportProblem: eps must be > 0");
    if (!(eta >= 0.0) || !(alpha >= 0.0))
      throw std::invalid_argument("TransportProblem: eta, alpha must be >= 0");
    if (eta == 0.0 && alpha == 0.0)
      throw std::invalid_argument("TransportProblem: eta = alpha = 0 leaves a singular system");
    if (eta > 0.0 && !(M > 0.0))
      throw std::invalid_argument("TransportProblem: eta branch needs M > 0");
    if (alpha > 0.0) {
      if (!rho_check) throw std::invalid_argument("TransportProblem: alpha branch needs rho_check");
      if (!rho_check->grid->same_layout(*grid))
        throw std::invalid_argument("TransportProblem: rho_check grid mismatch");
      if ((rho_check->v < 0.0).any())
        throw std::invalid_argument("TransportProblem: rho_check must be >= 0");
    }
  }
};

struct TransportReport {
  double rel_residual = 0.0;
  double min_rho = 0.0;
  double mass = 0.0;
  bool direct = true;
  int iterations = 0; // iterative fallback only
};

template <int Dim> double mass_of(const ScalarField<Dim>& rho) { return integral(rho); }

template <int Dim> double expected_mass(const TransportProblem<Dim>& p) {
  const double src = p.alpha > 0.0 ? p.alpha * integral(*p.rho_check) : 0.0;
  return (p.eta * p.M + src) / (p.eta + p.alpha);
}

template <int Dim>
ScalarField<Dim> solve_transport(const TransportProblem<Dim>& p, const VectorField<Dim>& v,
                                 TransportReport* report = nullptr) {
  p.validate();
  const Grid<Dim>& g = *p.grid;
  if (!v.grid->same_layout(g)) throw std::invalid_argument("solve_transport: v grid mismatch");
  if (!g.periodic)
    for (int c = 0; c < g.cells(); ++c)
      if (g.on_boundary_ring(c) && v.v.row(c).norm() != 0.0)
        throw std::invalid_argument("solve_transport: transport field must vanish on boundary cells");

  const int N = g.cells();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(N) * (2 * Dim + 1));
  Eigen::VectorXd rhs = Eigen::VectorXd::Constant(N, p.eta * p.M / g.volume());
  if (p.alpha > 0.0) rhs += p.alpha * p.rho_check->v.matrix();

  for (int c = 0; c < N; ++c) {
    const auto cc = g.coords(c);
    double diag = p.eta + p.alpha;
    for (int a = 0; a < Dim; ++a) {
      const double h = g.h(a);
      // loop over the two faces of cell c along axis a; assemble each
      // interior face once from its lower-index side
      for (int side = -1; side <= 1; side += 2) {
        auto nb = cc;
        nb[a] += side;
        if (nb[a] < 0 || nb[a] >= g.n[a]) {
          if (!g.periodic) continue; // boundary face: zero total flux
          nb[a] = (nb[a] + g.n[a]) % g.n[a];
        }
        const int nbi = g.index(nb);
        // diffusion: two-point flux, symmetric
        diag += p.eps / (h * h);
        double off = -p.eps / (h * h);
        // upwind convection through this face (outward normal velocity w)
        const double w = 0.5 * (v.v(c, a) + v.v(nbi, a)) * side;
        diag += std::max(w, 0.0) / h;
        off += std::min(w, 0.0) / h;
        trip.emplace_back(c, nbi, off);
      }
    }
    trip.emplace_back(c, c, diag);
  }

  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());

  Eigen::VectorXd x;
  TransportReport rep;
  const bool use_direct = N <= 128 * 128 * (Dim == 3 ? 128 : 1);
  if (use_direct) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("solve_transport: sparse LU factorization failed");
    x = lu.solve(rhs);
    // one refinement step: deep in the continuation ladder eta + alpha is tiny
    // and the mass functional amplifies the solve residual by 1/(eta + alpha)
    x += lu.solve((rhs - A * x).eval());
  } else {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> it;
    it.setTolerance(p.tol * 1e-2);
    it.setMaxIterations(20000);
    it.compute(A);
    x = it.solve(rhs);
    rep.direct = false;
    rep.iterations = static_cast<int>(it.iterations());
  }

  // normwise backward error: ||b|| alone is a bad yardstick here because the
  // right-hand side scales with eta + alpha while the operator scales with
  // eps / h^2, so deep in the continuation ladder a perfect direct solve
  // would look fake-bad relative to b
  const double denom = std::max(A.norm() * x.norm() + rhs.norm(), 1e-300);
  rep.rel_residual = (A * x - rhs).norm() / denom;
  if (!(rep.rel_residual <= p.tol))
    throw std::runtime_error("solve_transport: linear solve backward error " +
                             std::to_string(rep.rel_residual) + " exceeds tolerance");

  ScalarField<Dim> rho(g);
  rho.v = x.array();
  rep.min_rho = rho.v.minCoeff();
  rep.mass = mass_of(rho);
  if (report) *report = rep;
  return rho;
}

// --- renormalization defect ---------------------------------------------------
//
// For b in the power family b(s) = s^theta (theta >= 1), the renormalized
// continuity statement div(b(rho) u) + {rho b'(rho) - b(rho)} div u = 0 tested
// against phi reads, after integrating by parts,
//
//   R = -int b(rho) u . grad phi + int (theta - 1) rho^theta (div u) phi.
//
// theta = gamma reproduces the pressure identity with factor (gamma - 1).

struct RenormB {
  double theta = 2.0;
  void validate() const {
    if (!(theta >= 1.0)) throw std::invalid_argument("RenormB: theta must be >= 1");
  }
};

template <int Dim>
double renorm_residual(const ScalarField<Dim>& rho, const VectorField<Dim>& u, const RenormB& b,
                       const ScalarField<Dim>& phi) {
  b.validate();
  check_same_grid<Dim>(rho, u, "renorm_residual");
  check_same_grid<Dim>(rho, phi, "renorm_residual");
  if ((rho.v < 0.0).any())
    throw std::invalid_argument("renorm_residual: rho must be >= 0 for fractional powers");
  const Grid<Dim>& g = *rho.grid;
  const VectorField<Dim> gphi = grad(phi);
  const ScalarField<Dim> divu = divergence(u);
  double acc = 0.0;
  for (int c = 0; c < g.cells(); ++c) {
    const double brho = std::pow(rho.v[c], b.theta);
    acc += -brho * u.v.row(c).dot(gphi.v.row(c));
    acc += (b.theta - 1.0) * brho * divu.v[c] * phi.v[c];
  }
  return acc * g.cell_volume();
}

} // namespace nnflow
