#pragma once

// The coupled fixed point and the continuation ladder.
//
// One application of the operator E at fixed parameters (alpha, delta, eps,
// eta) is: mollify/truncate the velocity iterate, solve the continuity
// equation with that transport field, assemble the momentum right-hand side
// F(rho, v), and solve the nonlinear momentum system.  A solution of the
// regularized level is a fixed point u = E(u), found here by Anderson-
// accelerated Picard iteration: the next iterate extrapolates through a short
// history of residuals g = E(u) - u (depth 5, least squares via column-pivoted
// QR), falling back to the damped step u <- u + theta g with
// oscillation-triggered halving of theta whenever the history is empty or the
// accelerated step misbehaves.  Acceleration matters deep in the ladder: near
// eps = 1e-2 the E-map contraction rate climbs past 0.99 and plain damped
// Picard stops making visible progress.  The parameters are driven toward
// zero along a geometric ladder -- (alpha, delta, eta) jointly first, then
// eps -- with warm starts between rungs.

#include "nnflow/constitutive.hpp"
#include "nnflow/fields.hpp"
#include "nnflow/mollify.hpp"
#include "nnflow/momentum.hpp"
#include "nnflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnflow {

// All data defining one rung of the hierarchy: the four regularization knobs,
// the physical model, and the solver controls.  Body forces live alongside as
// explicit fields because they are grid-bound.
template <int Dim> struct LevelParams {
  // regularization knobs, each in (0, 1]
  double alpha = 1e-8; // continuity source coupling + q-Laplacian damping
  double delta = 1e-8; // mollification / truncation radius
  double eps = 1e-1;   // artificial diffusion
  double eta = 1e-8;   // mean-reversion toward M/|Omega|
  double q = 4.0;      // damping exponent, > Dim

  // physical block
  double M = 1.0; // total mass
  PressureLaw pressure;
  PowerLawParams power;

  // optional yield-stress block: switches the stress model and the
  // continuity source branch
  struct HBBlock {
    HBRegParams stress;
    double alpha_hb = 1.0; // continuity source coupling, fixed along rungs
    double beta = 0.0;     // zeroth-order momentum coefficient
    std::optional<ScalarField<Dim>> rho_check; // default: M/|Omega| constant
  };
  std::optional<HBBlock> hb;

  // solver controls
  double outer_tol = 1e-8; // on || u - E(u) ||_{W^{1,q}}
  int outer_max = 500;
  double theta = 0.5; // initial damping
  double momentum_tol = 1e-9;
  int momentum_max = 200;
  double transport_tol = 1e-12;

  double stress_exponent() const { return hb ? hb->stress.r : power.r; }

  void validate() const {
    auto knob = [](double v, const char* name) {
      if (!(v > 0.0) || !(v <= 1.0))
        throw std::invalid_argument(std::string("LevelParams: ") + name + " must be in (0, 1]");
    };
    knob(alpha, "alpha");
    knob(delta, "delta");
    knob(eps, "eps");
    knob(eta, "eta");
    if (!(q > Dim)) throw std::invalid_argument("LevelParams: q must exceed the dimension");
    if (!(M > 0.0)) throw std::invalid_argument("LevelParams: M must be > 0");
    pressure.validate();
    const double r = stress_exponent();
    if (!(r > 0.5 * Dim))
      throw std::invalid_argument("LevelParams: stress exponent must exceed d/2");
    if (hb) {
      hb->stress.validate();
      if (!(hb->alpha_hb > 0.0))
        throw std::invalid_argument("LevelParams: alpha_hb must be > 0");
      if (!(hb->beta >= 0.0)) throw std::invalid_argument("LevelParams: beta must be >= 0");
      if (!(pressure.gamma > 1.0) || !(pressure.gamma <= 2.0))
        throw std::invalid_argument("LevelParams: yield-stress mode needs gamma in (1, 2]");
      if (hb->rho_check && (hb->rho_check->v < 0.0).any())
        throw std::invalid_argument("LevelParams: rho_check must be >= 0");
    } else {
      power.validate();
      if (!admissible(Dim, power.r, pressure.gamma).admissible)
        throw std::invalid_argument("LevelParams: (d, r, gamma) outside the admissible set");
    }
    if (!(outer_tol > 0.0) || outer_max < 1 || !(theta > 0.0) || !(theta <= 1.0))
      throw std::invalid_argument("LevelParams: bad outer-solver controls");
  }
};

template <int Dim> struct EResult {
  VectorField<Dim> u;
  ScalarField<Dim> rho;
  TransportReport transport;
  MomentumReport momentum;
};

// One application of E: continuity solve -> F assembly -> momentum solve.
// The momentum solve warm-starts from the incoming iterate.
template <int Dim>
EResult<Dim> apply_E(const VectorField<Dim>& v, const LevelParams<Dim>& p,
                     const VectorField<Dim>& f, const VectorField<Dim>& g_force) {
  p.validate();
  const Grid<Dim>& g = *v.grid;
  check_same_grid<Dim>(v, f, "apply_E");
  check_same_grid<Dim>(v, g_force, "apply_E");

  const MollifyKernel<Dim> kernel(g, p.delta);
  const VectorField<Dim> w = mollify(truncate(v, p.delta), kernel);

  TransportProblem<Dim> tp;
  tp.grid = &g;
  tp.eps = p.eps;
  tp.eta = p.eta;
  tp.M = p.M;
  tp.tol = p.transport_tol;
  tp.alpha = p.hb ? p.hb->alpha_hb : p.alpha;
  if (tp.alpha > 0.0) {
    if (p.hb && p.hb->rho_check) tp.rho_check = *p.hb->rho_check;
    else {
      ScalarField<Dim> rc(g);
      rc.v.setConstant(p.M / g.volume());
      tp.rho_check = std::move(rc);
    }
  }

  EResult<Dim> out{VectorField<Dim>(g), ScalarField<Dim>(g), {}, {}};
  out.rho = solve_transport(tp, w, &out.transport);

  FAssemblyInputs<Dim> fin;
  fin.eps = p.eps;
  fin.eta = p.eta;
  fin.delta = p.delta;
  fin.pressure = p.pressure;
  const VectorField<Dim> F = assemble_F(out.rho, v, fin, f, g_force, &kernel);

  MomentumProblem<Dim> mp;
  mp.grid = &g;
  mp.alpha = p.alpha;
  mp.q = p.q;
  mp.tol = p.momentum_tol;
  mp.max_iter = p.momentum_max;
  if (p.hb) {
    mp.kind = StressKind::herschel_bulkley;
    mp.hb = p.hb->stress;
    mp.beta = p.hb->beta;
    if (mp.beta > 0.0) mp.rho_frozen = out.rho;
  } else {
    mp.kind = StressKind::power_law;
    mp.power = p.power;
  }
  out.u = solve_momentum(mp, F, v, &out.momentum);
  return out;
}

struct OuterReport {
  bool converged = false;
  int iterations = 0;
  double theta_final = 0.0;
  std::vector<double> update_trace; // || u_k - E(u_k) ||_{W^{1,q}}
  double posthoc_residual = 0.0;    // re-evaluated from scratch at the end
  double mass_error_max = 0.0;      // max_k | mass(rho_k) - expected |
  double min_rho = 0.0;             // min over iterates and cells
  TransportReport last_transport;
  MomentumReport last_momentum;
  std::string failure; // empty on success
};

// Damped Picard iteration for the fixed point u = E(u) at one rung.
template <int Dim>
std::pair<ScalarField<Dim>, VectorField<Dim>>
solve_level(const LevelParams<Dim>& p, const Grid<Dim>& g, const VectorField<Dim>& f,
            const VectorField<Dim>& g_force, const VectorField<Dim>* u0 = nullptr,
            OuterReport* report = nullptr) {
  p.validate();
  if (u0 && !u0->grid->same_layout(g))
    throw std::invalid_argument("solve_level: u0 grid mismatch");
  VectorField<Dim> u = u0 ? *u0 : VectorField<Dim>(g);
  zero_boundary_ring(u);

  // mass target: the mixed rule when the source branch is active
  const double cont_alpha = p.hb ? p.hb->alpha_hb : p.alpha;
  double mass_target = p.M;
  if (cont_alpha > 0.0) {
    const double rc_int = p.hb && p.hb->rho_check ? integral(*p.hb->rho_check) : p.M;
    mass_target = (p.eta * p.M + cont_alpha * rc_int) / (p.eta + cont_alpha);
  }

  OuterReport rep;
  double theta = p.theta;
  rep.min_rho = std::numeric_limits<double>::infinity();
  ScalarField<Dim> rho(g);
  rho.v.setConstant(p.M / g.volume());

  bool done = false;
  std::string failure;
  const int stall_window = 50;
  const int aa_depth = 5;
  int osc_count = 0;
  std::vector<Eigen::VectorXd> du_hist, dg_hist; // iterate / residual differences
  Eigen::VectorXd u_last, g_last;
  double best_update = std::numeric_limits<double>::infinity();
  try {
    for (int k = 0; k < p.outer_max; ++k) {
      EResult<Dim> e = apply_E(u, p, f, g_force);
      rho = std::move(e.rho);
      rep.last_transport = e.transport;
      rep.last_momentum = e.momentum;
      rep.min_rho = std::min(rep.min_rho, e.transport.min_rho);
      rep.mass_error_max = std::max(rep.mass_error_max, std::abs(e.transport.mass - mass_target));

      VectorField<Dim> diff(g);
      diff.v = u.v - e.u.v;
      const double update = sobolev_norm(diff, p.q);
      rep.update_trace.push_back(update);
      rep.iterations = k + 1;

      if (update <= p.outer_tol) {
        u = std::move(e.u);
        done = true;
        break;
      }

      // oscillation: two consecutive increases of the update norm halve the
      // fallback damping
      const auto& tr = rep.update_trace;
      if (tr.size() >= 2 && tr[tr.size() - 1] > tr[tr.size() - 2]) {
        if (++osc_count >= 2 && theta > 0.05) {
          theta *= 0.5;
          osc_count = 0;
        }
      } else osc_count = 0;

      // stagnation: no progress over a full window
      if ((int)tr.size() > stall_window &&
          tr.back() >= tr[tr.size() - 1 - stall_window]) {
        failure = "stagnation: update norm non-decreasing over " +
                  std::to_string(stall_window) + " iterations";
        break;
      }

      // Anderson step on the flattened dof vector; every iterate mixed below
      // is ring-zeroed, so the combination stays in the Dirichlet space
      const Eigen::Map<const Eigen::VectorXd> uk(u.v.data(), u.v.size());
      const Eigen::Map<const Eigen::VectorXd> Eu(e.u.v.data(), e.u.v.size());
      const Eigen::VectorXd gk = Eu - uk;

      if (update > 10.0 * best_update) {
        // runaway extrapolation: drop the history and restart from the safe
        // damped map
        du_hist.clear();
        dg_hist.clear();
        if (theta > 0.05) theta *= 0.5;
      } else if (u_last.size() > 0) {
        du_hist.push_back(uk - u_last);
        dg_hist.push_back(gk - g_last);
        if ((int)du_hist.size() > aa_depth) {
          du_hist.erase(du_hist.begin());
          dg_hist.erase(dg_hist.begin());
        }
      }
      best_update = std::min(best_update, update);
      u_last = uk;
      g_last = gk;

      // damped mixing (beta = theta) on both the residual and its history:
      // the transport upwinding makes E only piecewise smooth, and undamped
      // extrapolation chatters on the kinks deep in the ladder
      Eigen::VectorXd u_next;
      if (!du_hist.empty()) {
        Eigen::MatrixXd G(gk.size(), (Eigen::Index)dg_hist.size());
        for (Eigen::Index j = 0; j < G.cols(); ++j) G.col(j) = dg_hist[(size_t)j];
        const Eigen::VectorXd gamma = G.colPivHouseholderQr().solve(gk);
        u_next = uk + theta * gk;
        for (Eigen::Index j = 0; j < G.cols(); ++j)
          u_next -= gamma[j] * (du_hist[(size_t)j] + theta * dg_hist[(size_t)j]);
        if (!u_next.allFinite()) {
          du_hist.clear();
          dg_hist.clear();
          u_next = uk + theta * gk;
        }
      } else {
        u_next = uk + theta * gk;
      }
      u.v = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Dim>>(
          u_next.data(), g.cells(), Dim);
    }
  } catch (const std::exception& ex) {
    failure = ex.what();
  }

  rep.theta_final = theta;
  rep.converged = done;
  if (!done && failure.empty())
    failure = "no convergence within " + std::to_string(p.outer_max) + " outer iterations";
  rep.failure = done ? std::string() : failure;

  if (done) {
    // post-hoc residual, from scratch rather than the iteration's cache
    EResult<Dim> e = apply_E(u, p, f, g_force);
    VectorField<Dim> diff(g);
    diff.v = u.v - e.u.v;
    rep.posthoc_residual = sobolev_norm(diff, p.q);
    rho = std::move(e.rho);
  }
  if (report) *report = rep;
  if (!done) throw std::runtime_error("solve_level: " + rep.failure);
  return {std::move(rho), std::move(u)};
}

// ---------------------------------------------------------------------------
// Continuation ladder
// ---------------------------------------------------------------------------

template <int Dim> struct LadderSchedule {
  std::vector<LevelParams<Dim>> rungs;
  bool warm_start = true;

  void validate() const {
    if (rungs.empty()) throw std::invalid_argument("LadderSchedule: empty");
    for (const auto& r : rungs) r.validate();
    for (size_t k = 1; k < rungs.size(); ++k) {
      const auto& a = rungs[k - 1];
      const auto& b = rungs[k];
      if (b.alpha > a.alpha || b.delta > a.delta || b.eps > a.eps || b.eta > a.eta)
        throw std::invalid_argument("LadderSchedule: knobs must be non-increasing");
    }
  }

  // Geometric descent: (alpha, delta, eta) jointly by factor 0.1 down to
  // their floors while eps holds, then eps through eps_tail.
  static LadderSchedule joint_then_eps(const LevelParams<Dim>& start, int joint_rungs,
                                       const std::vector<double>& eps_tail,
                                       double floor_ade = 1e-8) {
    LadderSchedule s;
    LevelParams<Dim> p = start;
    s.rungs.push_back(p);
    for (int k = 0; k < joint_rungs; ++k) {
      p.alpha = std::max(p.alpha * 0.1, floor_ade);
      p.delta = std::max(p.delta * 0.1, floor_ade);
      p.eta = std::max(p.eta * 0.1, floor_ade);
      s.rungs.push_back(p);
    }
    for (double e : eps_tail) {
      if (!(e <= p.eps)) throw std::invalid_argument("joint_then_eps: eps_tail must descend");
      p.eps = e;
      s.rungs.push_back(p);
    }
    s.validate();
    return s;
  }
};

template <int Dim> struct RungResult {
  LevelParams<Dim> params;
  ScalarField<Dim> rho;
  VectorField<Dim> u;
  OuterReport report;
};

// Warm-started sweep down the schedule.  A rung failure stops the ladder;
// completed rungs are preserved in the returned list (the exception carries
// the failure; callers wanting partials catch LadderStop).
struct LadderStop : std::runtime_error {
  int failed_rung;
  LadderStop(int rung, const std::string& what)
      : std::runtime_error(what), failed_rung(rung) {}
};

template <int Dim>
std::vector<RungResult<Dim>>
run_ladder(const LadderSchedule<Dim>& s, const Grid<Dim>& g, const VectorField<Dim>& f,
           const VectorField<Dim>& g_force,
           const std::function<void(int, const RungResult<Dim>&)>& observer = {}) {
  s.validate();
  std::vector<RungResult<Dim>> out;
  VectorField<Dim> u(g);
  for (size_t k = 0; k < s.rungs.size(); ++k) {
    const LevelParams<Dim>& p = s.rungs[k];
    OuterReport rep;
    const bool warm = s.warm_start || k == 0; // rung 0's "warm" start is the zero field
    try {
      auto [rho, uk] = solve_level(p, g, f, g_force, warm ? &u : nullptr, &rep);
      u = uk;
      out.push_back(RungResult<Dim>{p, std::move(rho), std::move(uk), rep});
    } catch (const std::exception& ex) {
      throw LadderStop((int)k, "run_ladder: rung " + std::to_string(k) + ": " + ex.what());
    }
    if (observer) observer((int)k, out.back());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Yield-stress end-to-end: the same outer construction with the generalized
// continuity branch, descending the stress-regularization width, plus the
// pointwise stress audits of the final state.
// ---------------------------------------------------------------------------

template <int Dim> struct HBResult {
  ScalarField<Dim> rho;
  VectorField<Dim> u;
  SymTensorField<Dim> S_total;
  SymTensorField<Dim> P_part;
  OuterReport report;           // final rung
  double max_p_norm = 0.0;      // max |P_eps(Du)| over cells
  double max_stalled_s = 0.0;   // max |S_total| over cells with |Du| <= 1e-8
  int stalled_cells = 0;
  double mass = 0.0;
  double mass_rule = 0.0; // (eta M + alpha int rho_check) / (eta + alpha)
};

template <int Dim>
HBResult<Dim> solve_hb(const LevelParams<Dim>& base, const std::vector<double>& eps_reg_tail,
                       const Grid<Dim>& g, const VectorField<Dim>& f,
                       const VectorField<Dim>& g_force, const VectorField<Dim>* u0 = nullptr) {
  if (!base.hb) throw std::invalid_argument("solve_hb: hb block required");
  base.validate();

  LevelParams<Dim> p = base;
  VectorField<Dim> u = u0 ? *u0 : VectorField<Dim>(g);
  zero_boundary_ring(u);
  ScalarField<Dim> rho(g);
  OuterReport rep;
  std::vector<double> widths = {base.hb->stress.eps_reg};
  for (double w : eps_reg_tail)
    if (w < widths.back()) widths.push_back(w);
  for (double w : widths) {
    p.hb->stress.eps_reg = w;
    auto [r_k, u_k] = solve_level(p, g, f, g_force, &u, &rep);
    rho = std::move(r_k);
    u = std::move(u_k);
  }

  HBResult<Dim> out{std::move(rho), std::move(u), SymTensorField<Dim>(g), SymTensorField<Dim>(g),
                    rep};
  const SymTensorField<Dim> Du = sym_grad(out.u);
  for (int c = 0; c < g.cells(); ++c) {
    const auto S = stress_hb_reg(Du.at(c), p.hb->stress);
    out.S_total.set(c, S.total);
    out.P_part.set(c, S.p_part);
    out.max_p_norm = std::max(out.max_p_norm, S.p_part.norm());
    if (Du.at(c).norm() <= 1e-8) {
      ++out.stalled_cells;
      out.max_stalled_s = std::max(out.max_stalled_s, S.total.norm());
    }
  }
  out.mass = mass_of(out.rho);
  const double rc_int = p.hb->rho_check ? integral(*p.hb->rho_check) : p.M;
  out.mass_rule = (p.eta * p.M + p.hb->alpha_hb * rc_int) / (p.eta + p.hb->alpha_hb);
  return out;
}

} // namespace nnflow
