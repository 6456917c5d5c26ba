#pragma once

// Verification instruments: the explicit Bogovskii right inverse of the
// divergence, the mollification commutator and its decay, the per-level
// energy identity, scaling fits for the artificial-diffusion estimates, and
// the computable shadow of the defect-measure bookkeeping.  Everything here
// is a pure function of field inputs.

#include "nnflow/calculus.hpp"
#include "nnflow/fields.hpp"
#include "nnflow/mollify.hpp"
#include "nnflow/momentum.hpp"
#include "nnflow/outer.hpp"
#include "nnflow/transport.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nnflow {

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1], computed once per order by Newton
// iteration on the Legendre recurrence.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Bogovskii operator: B(f)(x) = int_Omega f(y) K(x, y) dy with
//
//   K(x, y) = (x - y)/|x - y|^d  int_{|x-y|}^inf  omega(y + s (x-y)/|x-y|) s^{d-1} ds
//
// where omega is a unit-mass quartic bump supported in an interior ball, so
// that div B(f) = f for zero-mean f and B(f) vanishes on the boundary of any
// domain star-shaped with respect to that ball.
//
// Two exact reductions make the evaluation both fast and accurate.  First,
// substituting s = |x-y| + t turns the ray integral into moments of the bump
// along the half-line {x + t e}, and for the quartic bump those moments
//
//   W_k(x, e) = int_0^inf omega(x + t e) t^k dt
//
// are closed-form polynomials over the ball-segment, so no ray quadrature is
// needed at all.  Second, the kernel's |x-y|^{1-d} singularity is handled by
// subtraction: with G0(x) = int K(x, y) dy,
//
//   B(f)(x) = int (f(y) - f(x)) K(x, y) dy + f(x) G0(x),
//
// where the first integrand is bounded (f is piecewise constant per cell, so
// its own cell drops out entirely) and G0 is evaluated per target by an exact
// radial integration -- polar coordinates around x collapse the r-integral in
// closed form, leaving a smooth angular quadrature split at the rectangle's
// corner directions.
// ---------------------------------------------------------------------------

template <int Dim> struct BogovskiiOp {
  const Grid<Dim>* grid = nullptr;
  Eigen::Matrix<double, Dim, 1> x0;
  double core_radius = 0.0;
  int near_sub = 4;        // per-axis subdivision of near cells
  double near_cells = 2.5; // subdivision radius in units of h
  int ang_nodes = 48;      // angular resolution of the self term (3D)

  using Vec = Eigen::Matrix<double, Dim, 1>;

  explicit BogovskiiOp(const Grid<Dim>& g) : grid(&g) {
    if (g.periodic) throw std::invalid_argument("BogovskiiOp: needs a rectangle");
    double ext_min = g.extent[0];
    for (int a = 0; a < Dim; ++a) {
      x0[a] = 0.5 * g.extent[a];
      ext_min = std::min(ext_min, g.extent[a]);
    }
    core_radius = 0.25 * ext_min;
  }

  double bump_constant() const {
    const double pi = 3.14159265358979323846;
    // unit mass of omega(z) = C (1 - |z|^2/rho^2)^2 on the ball
    if constexpr (Dim == 2) return 3.0 / (pi * core_radius * core_radius);
    else return 105.0 / (32.0 * pi * core_radius * core_radius * core_radius);
  }

  // W[k] = int_0^inf omega(x + t e) t^k dt for k < Dim; false if the ray
  // misses the bump.  omega(x + t e) = C P(t)^2 with P quadratic, so each
  // moment is a polynomial integral over the ball segment.
  bool ray_moments(const Vec& x, const Vec& e, double* W) const {
    const double rho2 = core_radius * core_radius;
    const Vec xc = x - x0;
    const double b = e.dot(xc);
    const double cq = xc.squaredNorm() - rho2;
    const double disc = b * b - cq;
    if (disc <= 0.0) return false;
    const double sd = std::sqrt(disc);
    const double lo = std::max(0.0, -b - sd);
    const double hi = -b + sd;
    if (hi <= lo) return false;
    const double p0 = -cq / rho2, p1 = -2.0 * b / rho2, p2 = -1.0 / rho2;
    const double qc[5] = {p0 * p0, 2 * p0 * p1, p1 * p1 + 2 * p0 * p2, 2 * p1 * p2, p2 * p2};
    double hp[8], lp[8];
    hp[0] = lp[0] = 1.0;
    for (int i = 1; i < 8; ++i) {
      hp[i] = hp[i - 1] * hi;
      lp[i] = lp[i - 1] * lo;
    }
    const double C = bump_constant();
    for (int k = 0; k < Dim; ++k) {
      double acc = 0.0;
      for (int j = 0; j < 5; ++j) {
        const int m = j + k + 1;
        acc += qc[j] * (hp[m] - lp[m]) / m;
      }
      W[k] = C * acc;
    }
    return true;
  }

  // K(x, y) via the moments: the inner integral equals sum_k binom(d-1,k) r^{d-1-k} W_k
  bool pair_kernel(const Vec& x, const Vec& y, Vec& K) const {
    const Vec dx = x - y;
    const double r = dx.norm();
    if (r <= 0.0) return false;
    const Vec e = dx / r;
    double W[Dim];
    if (!ray_moments(x, e, W)) return false;
    double factor;
    if constexpr (Dim == 2) factor = W[0] + W[1] / r;
    else factor = W[0] + 2.0 * W[1] / r + W[2] / (r * r);
    K = e * factor;
    return true;
  }

  // distance from x to the rectangle boundary along direction u
  double exit_distance(const Vec& x, const Vec& u) const {
    double R = std::numeric_limits<double>::infinity();
    for (int a = 0; a < Dim; ++a) {
      if (std::abs(u[a]) < 1e-300) continue;
      const double d = (u[a] > 0.0 ? grid->extent[a] - x[a] : x[a]) / std::abs(u[a]);
      R = std::min(R, d);
    }
    return std::max(R, 0.0);
  }

  // G0(x) = int_Omega K(x, y) dy.  Polar coordinates y = x + s u collapse the
  // radial integral exactly; only the angular integral is numerical.
  Vec self_term(const Vec& x) const {
    Vec acc = Vec::Zero();
    double W[Dim];
    if constexpr (Dim == 2) {
      // split at the corner directions, where the exit distance has kinks
      std::array<double, 4> th{std::atan2(0.0 - x[1], 0.0 - x[0]),
                               std::atan2(0.0 - x[1], grid->extent[0] - x[0]),
                               std::atan2(grid->extent[1] - x[1], grid->extent[0] - x[0]),
                               std::atan2(grid->extent[1] - x[1], 0.0 - x[0])};
      std::sort(th.begin(), th.end());
      const auto& [gx, gw] = detail::gauss_legendre(24);
      for (int arc = 0; arc < 4; ++arc) {
        const double a = th[arc];
        const double b = arc + 1 < 4 ? th[arc + 1] : th[0] + 2.0 * 3.14159265358979323846;
        if (!(b - a > 1e-14)) continue;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (size_t k = 0; k < gx.size(); ++k) {
          const double t = mid + half * gx[k];
          const Vec u{std::cos(t), std::sin(t)};
          const double R = exit_distance(x, u);
          const Vec e = -u;
          if (!ray_moments(x, e, W)) continue;
          acc += (half * gw[k] * (0.5 * R * R * W[0] + R * W[1])) * e;
        }
      }
    } else {
      // product rule: Gauss-Legendre in mu = cos(theta), midpoint in phi
      const auto& [gx, gw] = detail::gauss_legendre(ang_nodes);
      const int nphi = 2 * ang_nodes;
      const double dphi = 2.0 * 3.14159265358979323846 / nphi;
      for (int i = 0; i < (int)gx.size(); ++i) {
        const double mu = gx[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
        for (int j = 0; j < nphi; ++j) {
          const double phi = (j + 0.5) * dphi;
          const Vec u{st * std::cos(phi), st * std::sin(phi), mu};
          const double R = exit_distance(x, u);
          const Vec e = -u;
          if (!ray_moments(x, e, W)) continue;
          acc += (gw[i] * dphi *
                  (R * R * R / 3.0 * W[0] + R * R * W[1] + R * W[2])) * e;
        }
      }
    }
    return acc;
  }

  std::vector<VectorField<Dim>> apply_batch(const std::vector<const ScalarField<Dim>*>& fs) const {
    const Grid<Dim>& g = *grid;
    const int N = g.cells();
    const int nf = (int)fs.size();
    for (const auto* f : fs) {
      if (!f->grid->same_layout(g)) throw std::invalid_argument("BogovskiiOp: grid mismatch");
      const double l1 = lebesgue_norm(*f, 1.0);
      if (l1 > 0.0 && std::abs(integral(*f)) > 1e-10 * l1)
        throw std::invalid_argument("BogovskiiOp: input must have zero mean");
    }
    const double vol = g.cell_volume();
    double hmax = 0.0;
    for (int a = 0; a < Dim; ++a) hmax = std::max(hmax, g.h(a));
    const double near2 = near_cells * hmax * near_cells * hmax;
    const int sub = std::max(1, near_sub);
    const double subvol = vol / std::pow((double)sub, Dim);

    // quadrature points of one subdivided cell, as offsets from its center
    std::vector<Vec> sub_off;
    {
      std::array<int, Dim> idx{};
      while (true) {
        Vec o;
        for (int a = 0; a < Dim; ++a) o[a] = ((idx[a] + 0.5) / sub - 0.5) * g.h(a);
        sub_off.push_back(o);
        int a = 0;
        while (a < Dim && ++idx[a] >= sub) idx[a++] = 0;
        if (a == Dim) break;
      }
    }

    std::vector<Vec> centers(N);
    for (int c = 0; c < N; ++c) {
      const auto xc = g.cell_center(c);
      for (int a = 0; a < Dim; ++a) centers[c][a] = xc[a];
    }

    std::vector<VectorField<Dim>> out;
    out.reserve(nf);
    for (int m = 0; m < nf; ++m) out.emplace_back(g);

    Vec K;
    std::vector<Vec> T1(nf);
    for (int cx = 0; cx < N; ++cx) {
      const Vec& x = centers[cx];
      Vec T0 = Vec::Zero();
      for (int m = 0; m < nf; ++m) T1[m].setZero();
      for (int cy = 0; cy < N; ++cy) {
        if (cy == cx) continue; // the difference form drops the self cell exactly
        const Vec& y = centers[cy];
        const double d2 = (x - y).squaredNorm();
        if (d2 <= near2) {
          for (const auto& o : sub_off) {
            if (!pair_kernel(x, y + o, K)) continue;
            T0 += subvol * K;
            for (int m = 0; m < nf; ++m) T1[m] += (subvol * fs[m]->v[cy]) * K;
          }
        } else {
          if (!pair_kernel(x, y, K)) continue;
          T0 += vol * K;
          for (int m = 0; m < nf; ++m) T1[m] += (vol * fs[m]->v[cy]) * K;
        }
      }
      const Vec G0 = self_term(x);
      for (int m = 0; m < nf; ++m) {
        const Vec val = T1[m] + fs[m]->v[cx] * (G0 - T0);
        for (int a = 0; a < Dim; ++a) out[m].v(cx, a) = val[a];
      }
    }
    return out;
  }

  VectorField<Dim> apply(const ScalarField<Dim>& f) const {
    return std::move(apply_batch({&f}).front());
  }
};

template <int Dim>
VectorField<Dim> bogovskii_apply(const BogovskiiOp<Dim>& op, const ScalarField<Dim>& f) {
  return op.apply(f);
}

// The pressure-estimate test function: Psi = B(rho^{gamma/(r-1)} - mean).
template <int Dim>
VectorField<Dim> pressure_test_function(const ScalarField<Dim>& rho, double r, double gamma,
                                        const BogovskiiOp<Dim>& op) {
  if (!(r > 1.0) || !(gamma > 1.0))
    throw std::invalid_argument("pressure_test_function: need r > 1, gamma > 1");
  if ((rho.v < 0.0).any())
    throw std::invalid_argument("pressure_test_function: rho must be >= 0");
  ScalarField<Dim> z(*rho.grid);
  const double e = gamma / (r - 1.0);
  z.v = rho.v.pow(e);
  z.v -= integral(z) / rho.grid->volume();
  VectorField<Dim> psi = op.apply(z);
  // the raw field carries O(h) traces on the boundary ring; the pairing needs
  // a member of the discrete Dirichlet space, so project before returning
  zero_boundary_ring(psi);
  return psi;
}

// ---------------------------------------------------------------------------
// Mollification commutator r_eps(a, b) = grad(a_eps b) - grad((a b)_eps)
// and its decay along a descending list of radii.
// ---------------------------------------------------------------------------

template <int Dim>
VectorField<Dim> friedrichs_commutator_field(const ScalarField<Dim>& a, const ScalarField<Dim>& b,
                                             const MollifyKernel<Dim>& k) {
  check_same_grid<Dim>(a, b, "friedrichs_commutator");
  const ScalarField<Dim> a_eps = mollify(a, k);
  ScalarField<Dim> ab(*a.grid), prod(*a.grid);
  ab.v = a.v * b.v;
  const ScalarField<Dim> ab_eps = mollify(ab, k);
  prod.v = a_eps.v * b.v;
  VectorField<Dim> out = grad(prod);
  const VectorField<Dim> g2 = grad(ab_eps);
  out.v -= g2.v;
  return out;
}

template <int Dim>
std::vector<double> friedrichs_commutator(const ScalarField<Dim>& a, const ScalarField<Dim>& b,
                                          const std::vector<double>& eps_list, double s = 2.0) {
  const Grid<Dim>& g = *a.grid;
  double hmax = 0.0;
  for (int d = 0; d < Dim; ++d) hmax = std::max(hmax, g.h(d));
  std::vector<double> norms;
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : eps_list) {
    if (!(eps >= hmax))
      throw std::invalid_argument("friedrichs_commutator: radius below grid resolution");
    if (!(eps <= prev)) throw std::invalid_argument("friedrichs_commutator: radii must descend");
    prev = eps;
    const MollifyKernel<Dim> k(g, eps);
    norms.push_back(lebesgue_norm(friedrichs_commutator_field(a, b, k), s));
  }
  return norms;
}

// ---------------------------------------------------------------------------
// Per-level energy identity.  With S the level's stress law and z = rho^{gamma/2},
//
//   int S(Du):Du + (4 eps a/gamma) int |grad z|^2 + alpha int |grad u|^q
//     + [a gamma eta/(gamma-1)] int rho^gamma + (eta M/|Omega|) int |u|^2/2
//   = [a gamma eta/(gamma-1)] (M/|Omega|) int rho^{gamma-1} + int (rho f + g).u
//
// The alternate form halves the coefficient of int rho^gamma only; the
// constant state distinguishes the two.
// ---------------------------------------------------------------------------

enum class EnergyIdentityForm { appendix, main_text };

struct EnergyIdentity {
  // lhs: stress pairing, eps-density gradient, damping, eta-pressure, eta-kinetic
  std::array<double, 5> lhs{};
  // rhs: eta-pressure source, force work
  std::array<double, 2> rhs{};
  double lhs_total = 0.0;
  double rhs_total = 0.0;
  double rel_residual = 0.0;
};

template <int Dim>
EnergyIdentity energy_identity_residual(const ScalarField<Dim>& rho, const VectorField<Dim>& u,
                                        const LevelParams<Dim>& p, const VectorField<Dim>& f,
                                        const VectorField<Dim>& g_force,
                                        EnergyIdentityForm form = EnergyIdentityForm::appendix) {
  check_same_grid<Dim>(rho, u, "energy_identity_residual");
  const Grid<Dim>& g = *rho.grid;
  const double vol = g.cell_volume();
  const double a = p.pressure.a;
  const double gamma = p.pressure.gamma;
  const double eta_coeff = (form == EnergyIdentityForm::appendix)
                               ? a * gamma * p.eta / (gamma - 1.0)
                               : a * gamma * p.eta / (2.0 * (gamma - 1.0));

  EnergyIdentity e;

  const SymTensorField<Dim> Du = sym_grad(u);
  for (int c = 0; c < g.cells(); ++c) {
    const Eigen::Matrix<double, Dim, Dim> A = Du.at(c);
    Eigen::Matrix<double, Dim, Dim> S;
    if (p.hb) S = stress_hb_reg(A, p.hb->stress).total;
    else S = stress_power_law(A, p.power);
    e.lhs[0] += (S.array() * A.array()).sum() * vol;
  }

  ScalarField<Dim> z(g);
  z.v = rho.v.pow(0.5 * gamma);
  const double gz = lebesgue_norm(grad(z), 2.0);
  e.lhs[1] = (4.0 * p.eps * a / gamma) * gz * gz;

  const double gu = lebesgue_norm(grad_tensor(u), p.q);
  e.lhs[2] = p.alpha * std::pow(gu, p.q);

  double rho_gamma = 0.0, rho_gm1 = 0.0, u2 = 0.0, work = 0.0;
  for (int c = 0; c < g.cells(); ++c) {
    rho_gamma += std::pow(rho.v[c], gamma);
    rho_gm1 += std::pow(rho.v[c], gamma - 1.0);
    u2 += u.v.row(c).squaredNorm();
    work += (rho.v[c] * f.v.row(c) + g_force.v.row(c)).dot(u.v.row(c));
  }
  const double mean_rho = p.M / g.volume();
  e.lhs[3] = eta_coeff * rho_gamma * vol;
  e.lhs[4] = p.eta * mean_rho * 0.5 * u2 * vol;
  // the source side always carries the appendix coefficient; only the
  // alternate form's lhs weight differs
  e.rhs[0] = (a * gamma * p.eta / (gamma - 1.0)) * mean_rho * rho_gm1 * vol;
  e.rhs[1] = work * vol;

  for (double t : e.lhs) e.lhs_total += t;
  for (double t : e.rhs) e.rhs_total += t;
  e.rel_residual = std::abs(e.lhs_total - e.rhs_total) /
                   std::max({std::abs(e.lhs_total), std::abs(e.rhs_total), 1e-30});
  return e;
}

// ---------------------------------------------------------------------------
// Scaling fits: least-squares slope of log(value) against log(eps).
// ---------------------------------------------------------------------------

struct ScalingFit {
  bool degenerate = false; // all values vanished (slope undefined)
  double slope = 0.0;
  std::vector<std::pair<double, double>> points; // (eps, value) actually used
};

template <int Dim>
double eps_gradient_quantity(const ScalarField<Dim>& rho, double eps, double p_norm = 2.0) {
  return eps * lebesgue_norm(grad(rho), p_norm);
}

inline ScalingFit fit_log_slope(const std::vector<std::pair<double, double>>& pts) {
  ScalingFit fit;
  for (const auto& [e, v] : pts)
    if (v > 0.0 && e > 0.0) fit.points.push_back({e, v});
  if (fit.points.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [e, v] : fit.points) {
    const double x = std::log(e), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = (double)fit.points.size();
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

// ---------------------------------------------------------------------------
// Computable shadow of the defect bookkeeping: for nonnegative test weights
// phi, the stress-pairing gap between a coarse rung and the finest rung, and
// the pressure-transport pairing of each state.
// ---------------------------------------------------------------------------

struct DefectShadow {
  std::vector<double> t1;               // per phi: int (S(Du_c):Du_c - S(Du_f):Du_f) phi
  std::vector<double> transport_coarse; // per phi: transport pairing at the coarse state
  std::vector<double> transport_fine;
};

template <int Dim>
double stress_pairing_weighted(const ScalarField<Dim>& phi, const VectorField<Dim>& u,
                               const LevelParams<Dim>& p) {
  check_same_grid<Dim>(phi, u, "stress_pairing_weighted");
  const Grid<Dim>& g = *phi.grid;
  const SymTensorField<Dim> Du = sym_grad(u);
  double acc = 0.0;
  for (int c = 0; c < g.cells(); ++c) {
    const Eigen::Matrix<double, Dim, Dim> A = Du.at(c);
    Eigen::Matrix<double, Dim, Dim> S;
    if (p.hb) S = stress_hb_reg(A, p.hb->stress).total;
    else S = stress_power_law(A, p.power);
    acc += (S.array() * A.array()).sum() * phi.v[c];
  }
  return acc * g.cell_volume();
}

// (-1/(gamma-1)) int rho^gamma u . grad phi + int rho^gamma div u phi
template <int Dim>
double pressure_transport_pairing(const ScalarField<Dim>& rho, const VectorField<Dim>& u,
                                  double gamma, const ScalarField<Dim>& phi) {
  check_same_grid<Dim>(rho, u, "pressure_transport_pairing");
  check_same_grid<Dim>(rho, phi, "pressure_transport_pairing");
  const Grid<Dim>& g = *rho.grid;
  const VectorField<Dim> gphi = grad(phi);
  const ScalarField<Dim> divu = divergence(u);
  double acc = 0.0;
  for (int c = 0; c < g.cells(); ++c) {
    const double rg = std::pow(rho.v[c], gamma);
    acc += rg * (-u.v.row(c).dot(gphi.v.row(c)) / (gamma - 1.0) + divu.v[c] * phi.v[c]);
  }
  return acc * g.cell_volume();
}

template <int Dim>
DefectShadow defect_terms(const ScalarField<Dim>& rho_c, const VectorField<Dim>& u_c,
                          const ScalarField<Dim>& rho_f, const VectorField<Dim>& u_f,
                          const LevelParams<Dim>& p,
                          const std::vector<ScalarField<Dim>>& battery) {
  DefectShadow d;
  for (const auto& phi : battery) {
    if ((phi.v < 0.0).any()) throw std::invalid_argument("defect_terms: phi must be >= 0");
    d.t1.push_back(stress_pairing_weighted(phi, u_c, p) - stress_pairing_weighted(phi, u_f, p));
    d.transport_coarse.push_back(pressure_transport_pairing(rho_c, u_c, p.pressure.gamma, phi));
    d.transport_fine.push_back(pressure_transport_pairing(rho_f, u_f, p.pressure.gamma, phi));
  }
  return d;
}

// Nonnegative scalar test weights for the defect shadow: a constant, a
// squared sine product, and a polynomial bump.
template <int Dim> std::vector<ScalarField<Dim>> make_defect_battery(const Grid<Dim>& g) {
  const double pi = 3.14159265358979323846;
  std::vector<ScalarField<Dim>> out;
  ScalarField<Dim> one(g), sine(g), bump(g);
  one.v.setConstant(1.0);
  for (int c = 0; c < g.cells(); ++c) {
    const auto x = g.cell_center(c);
    double s = 1.0, b = 1.0;
    for (int a = 0; a < Dim; ++a) {
      const double t = std::sin(pi * x[a] / g.extent[a]);
      s *= t * t;
      const double u = x[a] / g.extent[a];
      b *= 16.0 * u * u * (1.0 - u) * (1.0 - u);
    }
    sine.v[c] = s;
    bump.v[c] = b;
  }
  out.push_back(std::move(one));
  out.push_back(std::move(sine));
  out.push_back(std::move(bump));
  return out;
}

// ---------------------------------------------------------------------------
// One rung's full diagnostics row set.
// ---------------------------------------------------------------------------

struct DiagnosticsRecord {
  EnergyIdentity energy;
  std::vector<double> renorm_residuals;                 // theta = 1, 2 maxima over battery
  std::vector<std::pair<double, double>> eps_grad_norms; // (p, eps * ||grad rho||_p)
  double stress_pairing = 0.0;                          // int S(Du):Du
  double pressure_divu = 0.0;                           // int a rho^gamma div u
  double weak_residual_max = 0.0;
  std::vector<double> weak_residuals;

  bool finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    for (double v : energy.lhs)
      if (!ok(v)) return false;
    for (double v : energy.rhs)
      if (!ok(v)) return false;
    if (!ok(energy.rel_residual) || !ok(stress_pairing) || !ok(pressure_divu) ||
        !ok(weak_residual_max))
      return false;
    for (double v : renorm_residuals)
      if (!ok(v)) return false;
    for (auto& [p, v] : eps_grad_norms)
      if (!ok(v)) return false;
    for (double v : weak_residuals)
      if (!ok(v)) return false;
    return true;
  }

  std::vector<std::pair<std::string, double>> flatten() const {
    std::vector<std::pair<std::string, double>> rows;
    const char* lhs_names[5] = {"energy_lhs_stress", "energy_lhs_eps_gradient",
                                "energy_lhs_damping", "energy_lhs_eta_pressure",
                                "energy_lhs_eta_kinetic"};
    const char* rhs_names[2] = {"energy_rhs_eta_source", "energy_rhs_force_work"};
    for (int i = 0; i < 5; ++i) rows.push_back({lhs_names[i], energy.lhs[i]});
    for (int i = 0; i < 2; ++i) rows.push_back({rhs_names[i], energy.rhs[i]});
    rows.push_back({"energy_rel_residual", energy.rel_residual});
    for (size_t i = 0; i < renorm_residuals.size(); ++i)
      rows.push_back({"renorm_residual_theta" + std::to_string(i + 1), renorm_residuals[i]});
    for (const auto& [p, v] : eps_grad_norms) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "eps_grad_norm_p%.4g", p);
      rows.push_back({buf, v});
    }
    rows.push_back({"stress_pairing", stress_pairing});
    rows.push_back({"pressure_divu", pressure_divu});
    rows.push_back({"weak_residual_max", weak_residual_max});
    for (size_t i = 0; i < weak_residuals.size(); ++i)
      rows.push_back({"weak_residual_" + std::to_string(i), weak_residuals[i]});
    return rows;
  }
};

template <int Dim>
DiagnosticsRecord diagnose_rung(const ScalarField<Dim>& rho, const VectorField<Dim>& u,
                                const LevelParams<Dim>& p, const VectorField<Dim>& f,
                                const VectorField<Dim>& g_force,
                                const std::vector<VectorField<Dim>>& weak_battery,
                                const std::vector<ScalarField<Dim>>& scalar_battery) {
  DiagnosticsRecord rec;
  rec.energy = energy_identity_residual(rho, u, p, f, g_force);

  for (double theta : {1.0, 2.0}) {
    double worst = 0.0;
    for (const auto& phi : scalar_battery)
      worst = std::max(worst, std::abs(renorm_residual(rho, u, RenormB{theta}, phi)));
    rec.renorm_residuals.push_back(worst);
  }

  rec.eps_grad_norms.push_back({2.0, eps_gradient_quantity(rho, p.eps, 2.0)});
  const double r_eff = p.stress_exponent();
  const auto dual = dual_exponents_unchecked(Dim, r_eff, p.pressure.gamma);
  if (std::isfinite(dual.q1) && dual.q1 > 1.01)
    rec.eps_grad_norms.push_back({dual.q1 - 0.01, eps_gradient_quantity(rho, p.eps, dual.q1 - 0.01)});

  ScalarField<Dim> one(*rho.grid);
  one.v.setConstant(1.0);
  rec.stress_pairing = stress_pairing_weighted(one, u, p);
  const ScalarField<Dim> divu = divergence(u);
  double pdv = 0.0;
  for (int c = 0; c < rho.grid->cells(); ++c)
    pdv += p.pressure.a * std::pow(rho.v[c], p.pressure.gamma) * divu.v[c];
  rec.pressure_divu = pdv * rho.grid->cell_volume();

  if (!weak_battery.empty()) {
    MomentumProblem<Dim> mp;
    mp.grid = rho.grid;
    if (p.hb) {
      mp.kind = StressKind::herschel_bulkley;
      mp.hb = p.hb->stress;
    } else {
      mp.kind = StressKind::power_law;
      mp.power = p.power;
    }
    const WeakResidualResult wr =
        weak_momentum_residual(rho, u, mp, p.pressure, f, g_force, weak_battery);
    rec.weak_residual_max = wr.max_normalized;
    rec.weak_residuals = wr.per_test;
  }
  return rec;
}

} // namespace nnflow
