// Implementation of the named verification suites.  Each suite exercises one
// slice of the stack: pointwise constitutive properties, the linear transport
// solve against a dense oracle, the nonlinear momentum solve against a
// gradient-descent oracle, full continuation ladders, and the study-style
// checks (energy identity refinement, sqrt-eps scaling, divergence-inverse
// accuracy, commutator decay, weak-residual descent, yield-stress audits).

#include "nnflow/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "nnflow/analysis.hpp"
#include "nnflow/calculus.hpp"
#include "nnflow/config.hpp"
#include "nnflow/constitutive.hpp"
#include "nnflow/corpus.hpp"
#include "nnflow/fields.hpp"
#include "nnflow/grid.hpp"
#include "nnflow/mollify.hpp"
#include "nnflow/momentum.hpp"
#include "nnflow/outer.hpp"
#include "nnflow/transport.hpp"

namespace nnflow::verify {
namespace {

std::string fmt(const char* f, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// body returns {pass, detail}; exceptions become failures
using Body = std::function<std::pair<bool, std::string>()>;

struct Suite {
  std::vector<CheckResult> out;

  void check(const std::string& name, const Body& body) {
    CheckResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto [ok, detail] = body();
      r.pass = ok;
      r.detail = std::move(detail);
    } catch (const std::exception& ex) {
      r.pass = false;
      r.detail = std::string("exception: ") + ex.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
};

double frob_dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a.array() * b.array()).sum();
}

// =============================================================================
// constitutive: monotonicity and growth with the derived constants
// =============================================================================

template <int D>
std::pair<bool, std::string> constitutive_model(double r, double mu0, double lambda0) {
  const PowerLawParams p{mu0, lambda0, r};
  auto rng = corpus::seeded(101 + 10 * D + static_cast<int>(r * 100));
  const int N = 10000;
  const double C1 = mu0 + lambda0 * std::pow(static_cast<double>(D), 0.5 * r);

  double worst_mono = std::numeric_limits<double>::infinity();
  double worst_upper = 0.0; // max |S(A)| / (C1 |A|^{r-1})
  double worst_lower = std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int k = 0; k < N; ++k) {
    const Eigen::Matrix<double, D, D> A = corpus::random_sym<D>(rng, 2.0);
    const Eigen::Matrix<double, D, D> B = corpus::random_sym<D>(rng, 2.0);
    const Eigen::Matrix<double, D, D> SA = stress_power_law(A, p);
    const Eigen::Matrix<double, D, D> SB = stress_power_law(B, p);

    const double mono = frob_dot(SA - SB, A - B);
    worst_mono = std::min(worst_mono, mono);
    if (!(mono >= 0.0)) ++bad;

    const double na = A.norm();
    const double upper = SA.norm() / (C1 * std::pow(na, r - 1.0));
    worst_upper = std::max(worst_upper, upper);
    if (!(upper <= 1.0 + 1e-12)) ++bad;

    // C2 = mu0; lambda0 = 0 makes this an identity, so the floor is the
    // fp-equality slack there instead of one-sided zero tolerance
    const double lower = frob_dot(SA, A) - mu0 * std::pow(na, r);
    const double floor = lambda0 == 0.0 ? -1e-12 * mu0 * std::pow(na, r) : 0.0;
    worst_lower = std::min(worst_lower, lower);
    if (!(lower >= floor)) ++bad;
  }

  // sharpness witnesses: A = c I attains C1 with equality; traceless A attains
  // C2 with equality (lambda0 = 0 makes every A an equality case for C2)
  double worst_c1_eq = 0.0, worst_c2_eq = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::uniform_real_distribution<double> cs(0.1, 3.0);
    const double c = cs(rng) * (k % 2 ? 1.0 : -1.0);
    const Eigen::Matrix<double, D, D> A = c * Eigen::Matrix<double, D, D>::Identity();
    const double ratio = stress_power_law(A, p).norm() / std::pow(A.norm(), r - 1.0);
    worst_c1_eq = std::max(worst_c1_eq, std::abs(ratio - C1) / C1);

    Eigen::Matrix<double, D, D> T = corpus::random_sym<D>(rng, 2.0);
    T -= (T.trace() / D) * Eigen::Matrix<double, D, D>::Identity();
    const double sa = frob_dot(stress_power_law(T, p), T);
    const double c2ref = mu0 * std::pow(T.norm(), r);
    worst_c2_eq = std::max(worst_c2_eq, std::abs(sa - c2ref) / c2ref);
  }
  if (worst_c1_eq > 1e-12 || worst_c2_eq > 1e-12) ++bad;

  return {bad == 0,
          fmt("d=%d r=%.2f lam0=%.2f: %d samples, min mono=%.3e, max |S|/(C1|A|^{r-1})=%.15f, "
              "min S:A-C2|A|^r=%.3e, C1/C2 equality witnesses %.2e/%.2e",
              D, r, lambda0, N, worst_mono, worst_upper, worst_lower, worst_c1_eq, worst_c2_eq)};
}

std::vector<CheckResult> suite_constitutive() {
  Suite s;
  struct M {
    double r, mu0, lambda0;
  };
  const std::vector<M> models = {{1.5, 0.7, 0.0}, {2.0, 1.0, 0.5}, {2.6, 0.9, 0.3}, {3.0, 1.2, 0.8}};
  for (const M& m : models) {
    s.check(fmt("constitutive/2d-r%.1f", m.r),
            [&] { return constitutive_model<2>(m.r, m.mu0, m.lambda0); });
    s.check(fmt("constitutive/3d-r%.1f", m.r),
            [&] { return constitutive_model<3>(m.r, m.mu0, m.lambda0); });
  }
  return s.out;
}

// =============================================================================
// hb-bounds: the regularized yield coefficient and stress caps
// =============================================================================

std::pair<bool, std::string> g_eps_profile(double eps) {
  auto rng = corpus::seeded(211 + static_cast<int>(1.0 / eps));
  std::vector<double> pts;
  pts.reserve(1000);
  // uniform coverage of the blend region plus a log spread of the far branch
  std::uniform_real_distribution<double> ub(0.0, 3.0 * eps);
  std::uniform_real_distribution<double> ul(std::log(1e-3 * eps), std::log(50.0 * eps));
  for (int k = 0; k < 700; ++k) pts.push_back(ub(rng));
  for (int k = 0; k < 300; ++k) pts.push_back(std::exp(ul(rng)));
  std::sort(pts.begin(), pts.end());

  const double slope_floor = -(4.0 / (9.0 * eps * eps)) * (1.0 + 1e-6);
  int bad = 0;
  double worst_gap = std::numeric_limits<double>::infinity();
  double worst_slope = std::numeric_limits<double>::infinity();
  double prev_g = std::numeric_limits<double>::infinity(), prev_s = -1.0;
  for (const double sv : pts) {
    const double gv = g_eps(sv, eps);
    const double cap = std::min(1.0 / eps, sv > 0.0 ? 1.0 / sv : std::numeric_limits<double>::infinity());
    worst_gap = std::min(worst_gap, cap - gv);
    if (!(gv <= cap)) ++bad;          // exact, no tolerance
    if (!(gv <= prev_g)) ++bad;       // non-increasing, no tolerance
    if (prev_s >= 0.0 && sv > prev_s) {
      const double slope = (gv - prev_g) / (sv - prev_s);
      worst_slope = std::min(worst_slope, slope);
      if (!(slope >= slope_floor)) ++bad;
    }
    prev_g = gv;
    prev_s = sv;
  }
  return {bad == 0, fmt("eps=%g: 1000 pts, min cap-g=%.3e (>=0), min FD slope=%.6e vs floor %.6e",
                        eps, worst_gap, worst_slope, slope_floor)};
}

template <int D>
std::pair<bool, std::string> hb_stress_caps() {
  auto rng = corpus::seeded(223 + D);
  HBRegParams hp;
  hp.tau_star = 0.8;
  hp.nu = 1.1;
  hp.r = 1.8;
  int bad = 0;
  double worst = 0.0, worst_sat = 0.0, min_pa = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> es(-3.0, 0.5);
  for (int k = 0; k < 10000; ++k) {
    hp.eps_reg = std::pow(10.0, es(rng));
    const Eigen::Matrix<double, D, D> A =
        corpus::random_sym<D>(rng, (k % 3 ? 2.0 : 4.0 * hp.eps_reg));
    const auto S = stress_hb_reg(A, hp);
    const double pn = S.p_part.norm() / hp.tau_star;
    worst = std::max(worst, pn);
    if (!(pn <= 1.0 + 1e-12)) ++bad;
    const double pa = frob_dot(S.p_part, A);
    min_pa = std::min(min_pa, pa);
    if (!(pa >= 0.0)) ++bad;
    if (A.norm() >= 1.5 * hp.eps_reg) {
      worst_sat = std::max(worst_sat, std::abs(pn - 1.0));
      if (!(std::abs(pn - 1.0) <= 1e-12)) ++bad;
    }
  }
  return {bad == 0, fmt("d=%d: 10^4 A, max |P|/tau*=%.15f, saturated-branch |.|-1 max=%.2e, "
                        "min P:A=%.3e",
                        D, worst, worst_sat, min_pa)};
}

std::vector<CheckResult> suite_hb_bounds() {
  Suite s;
  for (const double eps : {1.0, 0.1, 0.01})
    s.check(fmt("hb-bounds/g-eps-%g", eps), [eps] { return g_eps_profile(eps); });
  s.check("hb-bounds/stress-cap-2d", [] { return hb_stress_caps<2>(); });
  s.check("hb-bounds/stress-cap-3d", [] { return hb_stress_caps<3>(); });
  return s.out;
}

// =============================================================================
// continuity: positivity + mass rule on random fields, dense 8x8 oracle
// =============================================================================

// independent face-by-face dense assembly of the same upwind operator
template <int Dim>
void dense_transport_system(const TransportProblem<Dim>& p, const VectorField<Dim>& v,
                            Eigen::MatrixXd& A, Eigen::VectorXd& b) {
  const Grid<Dim>& g = *p.grid;
  const int N = g.cells();
  A = Eigen::MatrixXd::Zero(N, N);
  b = Eigen::VectorXd::Constant(N, p.eta * p.M / g.volume());
  if (p.alpha > 0.0) b += p.alpha * p.rho_check->v.matrix();
  for (int c = 0; c < N; ++c) A(c, c) += p.eta + p.alpha;
  for (int c = 0; c < N; ++c) {
    const auto cc = g.coords(c);
    for (int a = 0; a < Dim; ++a) {
      auto nbc = cc;
      nbc[a] += 1; // each interior face once, from its lower cell
      if (nbc[a] >= g.n[a]) {
        if (!g.periodic) continue;
        nbc[a] = 0;
      }
      const int nb = g.index(nbc);
      const double h = g.h(a);
      A(c, c) += p.eps / (h * h);
      A(c, nb) -= p.eps / (h * h);
      A(nb, nb) += p.eps / (h * h);
      A(nb, c) -= p.eps / (h * h);
      const double wf = 0.5 * (v.v(c, a) + v.v(nb, a)); // outward from the lower cell
      const int donor = wf >= 0.0 ? c : nb;
      A(c, donor) += wf / h;
      A(nb, donor) -= wf / h;
    }
  }
}

std::pair<bool, std::string> continuity_random_fields() {
  Grid<2> g({32, 32}, {1.0, 1.0});
  auto rng = corpus::seeded(307);
  std::uniform_real_distribution<double> uamp(0.3, 6.0), um(0.5, 2.0);
  // eta + alpha >= 0.01 keeps the absolute 1e-10 mass cap above the fp floor
  // of the solve: the mass functional amplifies the backward error by
  // (eps/h^2)/(eta + alpha)
  const double epses[] = {1.0, 0.3, 0.1, 0.03};
  const double etas[] = {1.0, 0.3, 0.1, 0.01};
  const double alphas[] = {0.0, 0.5, 1e-2};

  int bad = 0;
  double worst_min = 0.0, worst_mass = 0.0;
  for (int k = 0; k < 100; ++k) {
    TransportProblem<2> tp;
    tp.grid = &g;
    tp.eps = epses[k % 4];
    tp.eta = etas[(k / 4) % 4];
    tp.alpha = alphas[(k / 16) % 3];
    tp.M = um(rng);
    double rc_int = 0.0;
    if (tp.alpha > 0.0) {
      ScalarField<2> rc = corpus::random_trig_scalar(g, rng, 2, 0.4, 1.0);
      rc_int = integral(rc);
      tp.rho_check = std::move(rc);
    }
    VectorField<2> w = corpus::random_trig_velocity(g, rng, 3, uamp(rng));
    zero_boundary_ring(w);

    TransportReport rep;
    const ScalarField<2> rho = solve_transport(tp, w, &rep);
    const double target =
        (tp.eta * tp.M + tp.alpha * rc_int) / (tp.eta + tp.alpha); // mixed mass rule
    worst_min = std::min(worst_min, rep.min_rho);
    worst_mass = std::max(worst_mass, std::abs(rep.mass - target));
    if (!(rep.min_rho >= -1e-13)) ++bad;
    if (!(std::abs(rep.mass - target) <= 1e-10)) ++bad;
  }
  return {bad == 0,
          fmt("100 fields at n=32: min rho=%.3e (floor -1e-13), worst |mass-target|=%.3e "
              "(cap 1e-10)",
              worst_min, worst_mass)};
}

std::pair<bool, std::string> continuity_dense_oracle() {
  Grid<2> g({8, 8}, {1.0, 1.0});
  auto rng = corpus::seeded(311);
  std::uniform_real_distribution<double> uamp(0.5, 4.0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    TransportProblem<2> tp;
    tp.grid = &g;
    tp.eps = (k % 2) ? 0.05 : 0.4;
    tp.eta = (k % 3) ? 0.7 : 0.0;
    tp.alpha = (k % 3) ? 0.0 : 1.2;
    if (tp.alpha > 0.0) tp.rho_check = corpus::random_trig_scalar(g, rng, 2, 0.3, 1.0);
    VectorField<2> w = corpus::random_trig_velocity(g, rng, 2, uamp(rng));
    zero_boundary_ring(w);

    const ScalarField<2> rho = solve_transport(tp, w);
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    dense_transport_system(tp, w, A, b);
    const Eigen::VectorXd x = Eigen::FullPivLU<Eigen::MatrixXd>(A).solve(b);
    worst = std::max(worst, (x.array() - rho.v).abs().maxCoeff());
  }
  return {worst <= 1e-10, fmt("10 random 8x8 systems, max |sparse - dense oracle|=%.3e (cap 1e-10)",
                              worst)};
}

std::vector<CheckResult> suite_continuity() {
  Suite s;
  s.check("continuity/positivity-mass", continuity_random_fields);
  s.check("continuity/dense-oracle-8x8", continuity_dense_oracle);
  return s.out;
}

// =============================================================================
// momentum: Newtonian vs direct solve, r=3 vs gradient-descent oracle,
// energy monotonicity along the accepted steps
// =============================================================================

// gradient descent with Barzilai-Borwein step lengths and a monotone Armijo
// safeguard; uses only energy and gradient evaluations
template <int Dim>
VectorField<Dim> gd_minimize(const MomentumProblem<Dim>& p, const MomentumOperator<Dim>& op,
                             const VectorField<Dim>& F, double grad_tol, long max_iter,
                             double* final_grad) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(op.ndofs());
  double e = momentum_energy(p, op, op.unflatten(x), F);
  Eigen::VectorXd grad = momentum_gradient(p, op, op.unflatten(x), F);
  double gn = grad.norm();
  double t = 1e-3;
  Eigen::VectorXd x_prev, g_prev;
  for (long it = 0; it < max_iter && gn > grad_tol; ++it) {
    if (it > 0) {
      const Eigen::VectorXd s = x - x_prev;
      const Eigen::VectorXd y = grad - g_prev;
      const double sy = s.dot(y);
      if (sy > 0.0) t = std::clamp(s.squaredNorm() / sy, 1e-10, 1e4);
    }
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd xt = x - t * grad;
      const double et = momentum_energy(p, op, op.unflatten(xt), F);
      if (et <= e - 1e-6 * t * gn * gn) {
        x_prev = x;
        g_prev = grad;
        x = xt;
        e = et;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break; // step drowned in roundoff
    grad = momentum_gradient(p, op, op.unflatten(x), F);
    gn = grad.norm();
  }
  if (final_grad) *final_grad = gn;
  return op.unflatten(x);
}

std::pair<bool, std::string> momentum_newtonian_direct() {
  Grid<2> g({24, 24}, {1.0, 1.0});
  MomentumProblem<2> p;
  p.grid = &g;
  p.power = {1.0, 0.5, 2.0};
  p.alpha = 0.0; // keep the functional quadratic
  p.beta = 0.7;
  auto rng = corpus::seeded(401);
  p.rho_frozen = corpus::random_trig_scalar(g, rng, 2, 0.4, 1.0);
  p.tol = 1e-13;

  const VectorField<2> F = corpus::random_trig_velocity(g, rng, 2, 1.5);
  MomentumReport rep;
  const VectorField<2> u = solve_momentum(p, F, VectorField<2>(g), &rep);

  MomentumOperator<2> op(g);
  const Eigen::SparseMatrix<double> A = kacanov_matrix(p, op, VectorField<2>(g));
  const Eigen::VectorXd b = -momentum_gradient(p, op, VectorField<2>(g), F);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  const Eigen::VectorXd xd = ldlt.solve(b);
  const double scale = std::max(1.0, xd.norm());
  const double diff = (op.flatten(u) - xd).norm() / scale;
  return {diff <= 1e-10 && rep.converged,
          fmt("n=24 r=2: |iterative - direct|/|direct|=%.3e (cap 1e-10), %d iterations%s", diff,
              rep.iterations, rep.fp_limited ? " (fp-limited)" : "")};
}

std::pair<bool, std::string> momentum_r3_oracle() {
  Grid<2> g({16, 16}, {1.0, 1.0});
  MomentumProblem<2> p;
  p.grid = &g;
  p.power = {1.0, 0.3, 3.0};
  p.alpha = 0.1;
  p.q = 4.0;
  p.beta = 0.5;
  auto rng = corpus::seeded(409);
  p.rho_frozen = corpus::random_trig_scalar(g, rng, 2, 0.3, 1.0);
  p.tol = 1e-12;

  const VectorField<2> F = corpus::random_trig_velocity(g, rng, 2, 2.0);
  MomentumReport rep;
  const VectorField<2> u = solve_momentum(p, F, VectorField<2>(g), &rep);

  MomentumOperator<2> op(g);
  double gd_grad = 0.0;
  const VectorField<2> v = gd_minimize(p, op, F, 3e-10, 200000, &gd_grad);
  VectorField<2> diff(g);
  diff.v = u.v - v.v;
  const double d2 = lebesgue_norm(diff, 2.0);
  return {d2 <= 1e-6 && rep.converged,
          fmt("n=16 r=3: L2 distance to descent oracle=%.3e (cap 1e-6), oracle grad=%.2e, "
              "%d solver iterations",
              d2, gd_grad, rep.iterations)};
}

std::pair<bool, std::string> momentum_energy_monotone() {
  Grid<2> g({20, 20}, {1.0, 1.0});
  auto rng = corpus::seeded(419);
  int bad = 0;
  double worst_rise = 0.0;
  int total_steps = 0;
  for (const double r : {1.7, 2.0, 2.6, 3.0}) {
    MomentumProblem<2> p;
    p.grid = &g;
    p.power = {1.0, 0.4, r};
    p.alpha = 0.05;
    p.q = 4.0;
    p.beta = 0.3;
    p.rho_frozen = corpus::random_trig_scalar(g, rng, 2, 0.3, 1.0);
    const VectorField<2> F = corpus::random_trig_velocity(g, rng, 2, 3.0);
    MomentumReport rep;
    solve_momentum(p, F, VectorField<2>(g), &rep);
    for (size_t k = 1; k < rep.energy_trace.size(); ++k) {
      const double rise = rep.energy_trace[k] - rep.energy_trace[k - 1];
      worst_rise = std::max(worst_rise, rise);
      if (!(rise <= 0.0)) ++bad;
    }
    total_steps += static_cast<int>(rep.energy_trace.size());
    if (!rep.energy_monotone) ++bad;
  }
  return {bad == 0, fmt("4 exponents, %d accepted steps, worst energy rise=%.3e (cap 0)",
                        total_steps, worst_rise)};
}

std::vector<CheckResult> suite_momentum() {
  Suite s;
  s.check("momentum/newtonian-vs-direct", momentum_newtonian_direct);
  s.check("momentum/r3-vs-descent-oracle", momentum_r3_oracle);
  s.check("momentum/energy-monotone", momentum_energy_monotone);
  return s.out;
}

// =============================================================================
// ladder: trivial one-iteration fixed point, forced 3-rung convergence
// =============================================================================

std::pair<bool, std::string> ladder_trivial() {
  Grid<2> g({16, 16}, {1.0, 1.0});
  LevelParams<2> p;
  p.alpha = 0.1;
  p.delta = 0.1;
  p.eps = 0.3;
  p.eta = 0.1;
  p.M = 1.0;
  p.pressure = {1.0, 2.0};
  p.power = {1.0, 0.0, 2.0};
  const VectorField<2> zero(g);
  OuterReport rep;
  auto [rho, u] = solve_level(p, g, zero, zero, static_cast<const VectorField<2>*>(nullptr), &rep);
  const double rho_dev = (rho.v - p.M / g.volume()).abs().maxCoeff();
  const double u_norm = lebesgue_norm(u, 2.0);
  // the density solve leaves ~1e-13 fp noise on the constant state; its
  // pressure gradient seeds the momentum forcing, so u is fp-small, not zero
  const bool ok = rep.converged && rep.iterations == 1 && rho_dev <= 1e-12 && u_norm <= 1e-12;
  return {ok, fmt("zero data: %d outer iteration(s), |rho-const|=%.3e, |u|=%.3e", rep.iterations,
                  rho_dev, u_norm)};
}

std::pair<bool, std::string> ladder_forced() {
  Grid<2> g({32, 32}, {1.0, 1.0});
  LevelParams<2> start;
  start.alpha = 0.1;
  start.delta = 0.1;
  start.eps = 0.3;
  start.eta = 0.1;
  start.M = 1.0;
  start.pressure = {1.0, 2.0};
  start.power = {1.0, 0.2, 2.0};

  ForcingSpec spec;
  spec.preset = "vortex-forcing";
  spec.amplitude = {1.0, 1.0};
  const VectorField<2> f = sample_forcing(g, spec);
  const VectorField<2> zero(g);

  const auto sched = LadderSchedule<2>::joint_then_eps(start, 1, {0.1});
  const auto rungs = run_ladder(sched, g, f, zero);
  bool ok = rungs.size() == 3;
  std::string per;
  for (const auto& r : rungs) {
    ok = ok && r.report.converged && r.report.iterations <= 500 &&
         r.report.update_trace.back() <= 1e-8;
    per += fmt(" [it=%d upd=%.1e]", r.report.iterations, r.report.update_trace.back());
  }
  return {ok, fmt("3 rungs at n=32:%s (caps: 500 iterations, update 1e-8)", per.c_str())};
}

std::vector<CheckResult> suite_ladder() {
  Suite s;
  s.check("ladder/trivial-one-iteration", ladder_trivial);
  s.check("ladder/forced-3-rungs", ladder_forced);
  return s.out;
}

// =============================================================================
// energy: constant-state identity, residual refinement on solved states
// =============================================================================

std::pair<bool, std::string> energy_constant_state() {
  Grid<2> g({32, 32}, {1.0, 1.0});
  LevelParams<2> p;
  p.alpha = 0.1;
  p.delta = 0.1;
  p.eps = 0.3;
  p.eta = 0.5;
  p.M = 1.3;
  p.pressure = {1.0, 1.8};
  p.power = {1.0, 0.3, 2.2};
  ScalarField<2> rho(g);
  rho.v.setConstant(p.M / g.volume());
  const VectorField<2> u(g), zero(g);
  const EnergyIdentity e = energy_identity_residual(rho, u, p, zero, zero);
  return {e.rel_residual <= 1e-12,
          fmt("constant state: rel residual=%.3e (cap 1e-12), lhs=%.6f rhs=%.6f", e.rel_residual,
              e.lhs_total, e.rhs_total)};
}

struct EnergyConfig {
  const char* label;
  double r, lambda0, gamma;
  const char* preset;
  double amp;
};

double solved_energy_residual(const EnergyConfig& cfg, int n) {
  Grid<2> g({n, n}, {1.0, 1.0});
  LevelParams<2> p;
  p.alpha = 1e-8;
  p.delta = 1e-8;
  p.eps = 0.1;
  p.eta = 1e-8;
  p.M = 1.0;
  p.pressure = {1.0, cfg.gamma};
  p.power = {1.0, cfg.lambda0, cfg.r};

  ForcingSpec spec;
  spec.preset = cfg.preset;
  spec.amplitude = {cfg.amp, cfg.amp};
  const VectorField<2> f = sample_forcing(g, spec);
  const VectorField<2> zero(g);
  auto [rho, u] = solve_level(p, g, f, zero);
  return energy_identity_residual(rho, u, p, f, zero).rel_residual;
}

std::pair<bool, std::string> energy_refinement(const EnergyConfig& cfg) {
  const double r32 = solved_energy_residual(cfg, 32);
  const double r64 = solved_energy_residual(cfg, 64);
  return {r64 <= 0.6 * r32, fmt("%s: residual(32)=%.4e residual(64)=%.4e ratio=%.3f (cap 0.6)",
                                cfg.label, r32, r64, r64 / r32)};
}

std::vector<CheckResult> suite_energy() {
  Suite s;
  s.check("energy/constant-state", energy_constant_state);
  const EnergyConfig a{"r=2 gamma=1.5 vortex", 2.0, 0.2, 1.5, "vortex-forcing", 0.6};
  const EnergyConfig b{"r=2.6 gamma=2.5 shear", 2.6, 0.0, 2.5, "shear", 0.8};
  s.check("energy/refinement-r2-g1.5", [a] { return energy_refinement(a); });
  s.check("energy/refinement-r2.6-g2.5", [b] { return energy_refinement(b); });
  return s.out;
}

// =============================================================================
// scaling: fitted slope of log(eps ||grad rho||) vs log(eps) >= 0.4
// =============================================================================

std::pair<bool, std::string> scaling_config(double r, double gamma, const char* preset,
                                            double amp) {
  Grid<2> g({64, 64}, {1.0, 1.0});
  const std::vector<double> eps_list = {1e-1, 3e-2, 1e-2, 3e-3};

  LadderSchedule<2> sched;
  for (const double eps : eps_list) {
    LevelParams<2> p;
    p.alpha = 1e-3;
    p.delta = 1e-3;
    p.eps = eps;
    p.eta = 1e-3;
    p.M = 1.0;
    p.pressure = {1.0, gamma};
    p.power = {1.0, 0.2, r};
    sched.rungs.push_back(p);
  }

  ForcingSpec spec;
  spec.preset = preset;
  spec.amplitude = {amp, amp};
  const VectorField<2> f = sample_forcing(g, spec);
  const VectorField<2> zero(g);

  std::vector<std::pair<double, double>> pts;
  const std::function<void(int, const RungResult<2>&)> observe = [&](int,
                                                                     const RungResult<2>& rr) {
    pts.push_back({rr.params.eps, eps_gradient_quantity(rr.rho, rr.params.eps)});
  };
  run_ladder(sched, g, f, zero, observe);
  const ScalingFit fit = fit_log_slope(pts);
  std::string vals;
  for (const auto& [e, q] : pts) vals += fmt(" (%g,%.3e)", e, q);
  return {!fit.degenerate && fit.slope >= 0.4,
          fmt("r=%.1f gamma=%.1f: slope=%.3f (floor 0.4), points%s", r, gamma, fit.slope,
              vals.c_str())};
}

std::vector<CheckResult> suite_scaling() {
  Suite s;
  s.check("scaling/gamma-1.5", [] { return scaling_config(2.0, 1.5, "vortex-forcing", 1.0); });
  s.check("scaling/gamma-2.5", [] { return scaling_config(2.6, 2.5, "shear", 1.0); });
  return s.out;
}

// =============================================================================
// bogovskii: corpus accuracy at n=64, exact linearity
// =============================================================================

std::pair<bool, std::string> bogovskii_corpus_accuracy() {
  Grid<2> g({64, 64}, {1.0, 1.0});
  BogovskiiOp<2> op(g);
  const std::vector<ScalarField<2>> corpus = corpus::bogovskii_corpus(g);
  std::vector<const ScalarField<2>*> ptrs;
  for (const auto& f : corpus) ptrs.push_back(&f);
  const auto psis = op.apply_batch(ptrs);

  double worst = 0.0;
  int worst_i = -1, bad = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const ScalarField<2> dv = divergence(psis[i]);
    ScalarField<2> err(g);
    err.v = dv.v - corpus[i].v;
    const double rel = lebesgue_norm(err, 2.0) / lebesgue_norm(corpus[i], 2.0);
    if (rel > worst) {
      worst = rel;
      worst_i = static_cast<int>(i);
    }
    if (!(rel <= 0.02)) ++bad;
  }
  return {bad == 0, fmt("20 members at n=64: worst rel div error=%.4f (member %d, cap 0.02)",
                        worst, worst_i)};
}

std::pair<bool, std::string> bogovskii_linearity() {
  Grid<2> g({48, 48}, {1.0, 1.0});
  BogovskiiOp<2> op(g);
  auto rng = corpus::seeded(809);
  ScalarField<2> f1 = corpus::random_trig_scalar(g, rng, 3, 1.0);
  ScalarField<2> f2 = corpus::random_trig_scalar(g, rng, 3, 1.0);
  f1.v -= integral(f1) / g.volume();
  f2.v -= integral(f2) / g.volume();
  const double a = 0.7, b = -1.3;
  ScalarField<2> fc(g);
  fc.v = a * f1.v + b * f2.v;
  const std::vector<const ScalarField<2>*> ptrs = {&f1, &f2, &fc};
  const auto psis = op.apply_batch(ptrs);
  double scale = 0.0;
  for (int c = 0; c < g.cells(); ++c) scale = std::max(scale, psis[2].v.row(c).norm());
  const double gap =
      (psis[2].v - a * psis[0].v - b * psis[1].v).cwiseAbs().maxCoeff() / std::max(scale, 1e-30);
  return {gap <= 1e-12, fmt("|B(af+bg) - aB(f) - bB(g)|/|B| = %.3e (cap 1e-12)", gap)};
}

std::vector<CheckResult> suite_bogovskii() {
  Suite s;
  s.check("bogovskii/corpus-accuracy", bogovskii_corpus_accuracy);
  s.check("bogovskii/linearity", bogovskii_linearity);
  return s.out;
}

// =============================================================================
// friedrichs: commutator decay on the torus at n=128
// =============================================================================

std::pair<bool, std::string> friedrichs_decay() {
  Grid<2> g({128, 128}, {1.0, 1.0}, /*periodic=*/true);
  auto rng = corpus::seeded(907);
  const ScalarField<2> a = corpus::random_trig_scalar(g, rng, 2, 1.0, 1.2);
  const ScalarField<2> b = corpus::random_trig_scalar(g, rng, 2, 1.0, 0.7);
  const double h = g.min_h();
  const std::vector<double> radii = {8.0 * h, 4.0 * h, 2.0 * h};
  const std::vector<double> norms = friedrichs_commutator(a, b, radii);
  const bool decreasing = norms[1] < norms[0] && norms[2] < norms[1];
  const double final_ratio = norms[2] / norms[0];
  return {decreasing && final_ratio <= 0.2,
          fmt("n=128 torus: |r_eps| = %.4e -> %.4e -> %.4e, final/initial=%.4f (cap 0.2)",
              norms[0], norms[1], norms[2], final_ratio)};
}

std::vector<CheckResult> suite_friedrichs() {
  Suite s;
  s.check("friedrichs/decay-8h-4h-2h", friedrichs_decay);
  return s.out;
}

// =============================================================================
// weak-residual: descent across the last three eps-rungs of a ladder
// =============================================================================

std::pair<bool, std::string> weak_residual_descent() {
  Grid<2> g({32, 32}, {1.0, 1.0});
  LadderSchedule<2> sched;
  const double knobs[][4] = {
      // alpha, delta, eps, eta; every knob moves on every rung
      {1e-1, 1e-1, 3e-1, 1e-1},
      {1e-2, 1e-2, 1e-1, 1e-2},
      {1e-3, 1e-3, 3e-2, 1e-3},
      {1e-4, 1e-4, 1e-2, 1e-4},
  };
  for (const auto& k : knobs) {
    LevelParams<2> p;
    p.alpha = k[0];
    p.delta = k[1];
    p.eps = k[2];
    p.eta = k[3];
    p.M = 1.0;
    p.pressure = {1.0, 2.0};
    p.power = {1.0, 0.2, 2.0};
    sched.rungs.push_back(p);
  }

  ForcingSpec spec;
  spec.preset = "vortex-forcing";
  spec.amplitude = {1.0, 1.0};
  const VectorField<2> f = sample_forcing(g, spec);
  const VectorField<2> zero(g);
  const auto battery = make_sine_battery(g, 2);

  std::vector<double> res;
  const std::function<void(int, const RungResult<2>&)> observe = [&](int,
                                                                     const RungResult<2>& rr) {
    MomentumProblem<2> model;
    model.grid = &g;
    model.power = rr.params.power;
    const auto w =
        weak_momentum_residual(rr.rho, rr.u, model, rr.params.pressure, f, zero, battery);
    res.push_back(w.max_normalized);
  };
  run_ladder(sched, g, f, zero, observe);

  const size_t m = res.size();
  const bool ok = res[m - 2] < res[m - 3] && res[m - 1] < res[m - 2];
  std::string vals;
  for (const double v : res) vals += fmt(" %.4e", v);
  return {ok, fmt("residuals along rungs:%s (last three must descend)", vals.c_str())};
}

std::vector<CheckResult> suite_weak_residual() {
  Suite s;
  s.check("weak-residual/ladder-descent", weak_residual_descent);
  return s.out;
}

// =============================================================================
// hb-run: yield-stress end-to-end audits
// =============================================================================

std::pair<bool, std::string> hb_end_to_end() {
  Grid<2> g({24, 24}, {1.0, 1.0});
  LevelParams<2> p;
  p.alpha = 1e-2; // q-damping knob
  p.delta = 1e-2;
  p.eps = 0.1;
  p.eta = 0.1;
  p.M = 1.3;
  p.pressure = {1.0, 1.5};

  LevelParams<2>::HBBlock hb;
  hb.stress = {0.8, 1.0, 2.0, 1e-1};
  hb.alpha_hb = 1.0;
  hb.beta = 0.0;
  auto rng = corpus::seeded(1103);
  hb.rho_check = corpus::random_trig_scalar(g, rng, 2, 0.3, 1.0); // integral != M
  p.hb = std::move(hb);

  ForcingSpec spec;
  spec.preset = "vortex-forcing";
  spec.amplitude = {0.5, 0.5};
  const VectorField<2> f = sample_forcing(g, spec);
  const VectorField<2> zero(g);

  const HBResult<2> res = solve_hb(p, {1e-2, 1e-3}, g, f, zero);

  const double tau = p.hb->stress.tau_star;
  const bool p_ok = res.max_p_norm <= tau * (1.0 + 1e-12);
  const bool stall_ok = res.max_stalled_s <= tau * (1.0 + 1e-6);
  const double mass_err = std::abs(res.mass - res.mass_rule);
  const bool mass_ok = mass_err <= 1e-10;
  return {p_ok && stall_ok && mass_ok && res.report.converged,
          fmt("gamma=1.5 alpha_hb=1 beta=0: max|P|=%.12f (tau*=%.1f), stalled cells=%d with "
              "max|S|=%.3e, |mass-rule|=%.2e (cap 1e-10)",
              res.max_p_norm, tau, res.stalled_cells, res.max_stalled_s, mass_err)};
}

std::vector<CheckResult> suite_hb_run() {
  Suite s;
  s.check("hb-run/end-to-end-audits", hb_end_to_end);
  return s.out;
}

// =============================================================================
// renorm: renormalization defect decays under refinement
// =============================================================================

std::pair<bool, std::string> renorm_refinement() {
  // fixed smooth data; the solved density's renormalization defect against a
  // fixed test function must shrink as the grid refines
  std::vector<double> defects;
  for (const int n : {16, 32, 64}) {
    Grid<2> g({n, n}, {1.0, 1.0});
    TransportProblem<2> tp;
    tp.grid = &g;
    tp.eps = 0.2;
    tp.eta = 1.0;
    tp.M = 1.0;
    VectorField<2> w(g);
    for (int c = 0; c < g.cells(); ++c) {
      const auto x = g.cell_center(c);
      const double sx = std::sin(std::numbers::pi * x[0]);
      const double sy = std::sin(std::numbers::pi * x[1]);
      w.v(c, 0) = 0.8 * sx * sx * std::sin(2.0 * std::numbers::pi * x[1]);
      w.v(c, 1) = -0.8 * sy * sy * std::sin(2.0 * std::numbers::pi * x[0]);
    }
    zero_boundary_ring(w);
    const ScalarField<2> rho = solve_transport(tp, w);
    const ScalarField<2> phi = sample_scalar<2>(g, [](const std::array<double, 2>& x) {
      return std::cos(std::numbers::pi * x[0]) * std::cos(std::numbers::pi * x[1]) + 1.0;
    });
    RenormB b;
    b.theta = 2.0;
    // defect of the renormalized statement relative to the theta=1 mass scale
    defects.push_back(std::abs(renorm_residual(rho, w, b, phi)));
  }
  const bool ok = defects[1] < defects[0] && defects[2] < defects[1];
  return {ok, fmt("theta=2 defect at n=16/32/64: %.4e / %.4e / %.4e (must descend)", defects[0],
                  defects[1], defects[2])};
}

std::vector<CheckResult> suite_renorm() {
  Suite s;
  s.check("renorm/defect-refinement", renorm_refinement);
  return s.out;
}

// =============================================================================
// registry
// =============================================================================

using SuiteFn = std::vector<CheckResult> (*)();

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> reg = {
      {"constitutive", suite_constitutive},
      {"hb-bounds", suite_hb_bounds},
      {"continuity", suite_continuity},
      {"momentum", suite_momentum},
      {"ladder", suite_ladder},
      {"energy", suite_energy},
      {"scaling", suite_scaling},
      {"bogovskii", suite_bogovskii},
      {"friedrichs", suite_friedrichs},
      {"weak-residual", suite_weak_residual},
      {"hb-run", suite_hb_run},
      {"renorm", suite_renorm},
  };
  return reg;
}

} // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> names;
  for (const auto& [n, fn] : registry()) names.push_back(n);
  names.push_back("all");
  return names;
}

std::vector<CheckResult> run_suite(const std::string& name) {
  if (name == "all") {
    std::vector<CheckResult> out;
    for (const auto& [n, fn] : registry()) {
      auto rs = fn();
      out.insert(out.end(), std::make_move_iterator(rs.begin()),
                 std::make_move_iterator(rs.end()));
    }
    return out;
  }
  for (const auto& [n, fn] : registry())
    if (n == name) return fn();
  throw std::invalid_argument("run_suite: unknown suite '" + name + "'");
}

} // namespace nnflow::verify
