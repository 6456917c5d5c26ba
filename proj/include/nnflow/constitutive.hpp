#pragma once

// Pointwise material laws for the compressible generalized-Newtonian model:
// power-law viscous stress with a bulk part, isentropic pressure, and the
// regularized Herschel-Bulkley (yield) stress.  All operations are free
// functions over Eigen matrix expressions so they work for d = 2 and d = 3
// and inside larger expressions without temporaries.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nnflow {

struct PowerLawParams {
  double mu0 = 1.0;     // shear consistency, > 0
  double lambda0 = 0.0; // bulk consistency, >= 0
  double r = 2.0;       // power-law exponent, > 1

  void validate() const {
    if (!(mu0 > 0.0)) throw std::invalid_argument("PowerLawParams: mu0 must be > 0");
    if (!(lambda0 >= 0.0)) throw std::invalid_argument("PowerLawParams: lambda0 must be >= 0");
    if (!(r > 1.0)) throw std::invalid_argument("PowerLawParams: r must be > 1");
  }
};

struct PressureLaw {
  double a = 1.0;     // > 0
  double gamma = 2.0; // adiabatic exponent, > 1

  void validate() const {
    if (!(a > 0.0)) throw std::invalid_argument("PressureLaw: a must be > 0");
    if (!(gamma > 1.0)) throw std::invalid_argument("PressureLaw: gamma must be > 1");
  }
};

struct HBRegParams {
  double tau_star = 1.0; // yield stress, >= 0
  double nu = 1.0;       // consistency of the power part, > 0
  double r = 2.0;        // > 1
  double eps_reg = 1e-2; // regularization width, > 0

  void validate() const {
    if (!(tau_star >= 0.0)) throw std::invalid_argument("HBRegParams: tau_star must be >= 0");
    if (!(nu > 0.0)) throw std::invalid_argument("HBRegParams: nu must be > 0");
    if (!(r > 1.0)) throw std::invalid_argument("HBRegParams: r must be > 1");
    if (!(eps_reg > 0.0)) throw std::invalid_argument("HBRegParams: eps_reg must be > 0");
  }
};

// S(A) = mu0 |A|^{r-2} A + lambda0 |tr A|^{r-2} (tr A) I, Frobenius norm.
// S(0) = 0 exactly; no NaN for r < 2 thanks to the early return.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
stress_power_law(const Eigen::MatrixBase<Derived>& A, const PowerLawParams& p) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  const Scalar nA = A.norm();
  Mat S = Mat::Zero(A.rows(), A.cols());
  if (nA > Scalar(0)) S += p.mu0 * std::pow(nA, Scalar(p.r - 2.0)) * A;
  const Scalar tr = A.trace();
  if (tr != Scalar(0)) {
    const Scalar c = p.lambda0 * std::pow(std::abs(tr), Scalar(p.r - 2.0)) * tr;
    S += c * Mat::Identity(A.rows(), A.cols());
  }
  return S;
}

// Potential of stress_power_law: (mu0/r)|A|^r + (lambda0/r)|tr A|^r.
template <typename Derived>
typename Derived::Scalar stress_power_law_potential(const Eigen::MatrixBase<Derived>& A,
                                                    const PowerLawParams& p) {
  const double nA = A.norm();
  const double tr = std::abs(A.trace());
  return (p.mu0 / p.r) * std::pow(nA, p.r) + (p.lambda0 / p.r) * std::pow(tr, p.r);
}

inline double pressure(double rho, const PressureLaw& law) {
  if (rho < 0.0) throw std::invalid_argument("pressure: rho must be >= 0");
  return law.a * std::pow(rho, law.gamma);
}

// ---------------------------------------------------------------------------
// Regularized yield coefficient g_eps.
//
//   g_eps(s) = 1/eps            on [0, eps/2]
//            = 1/m_eps(s)       on (eps/2, 3eps/2)      (C^1 blend)
//            = 1/s              on [3eps/2, inf)
//
//   m_eps(s) = eps * (1 + u^2/2 + 0.3 u^2 (1-u)^2),  u = (s - eps/2)/eps.
//
// m matches value and slope of max(eps, s) at both ends of the blend, and
// m - s = eps (1-u)^2 (1/2 + 0.3 u^2) >= 0, m - eps = eps u^2 (1/2 + 0.3 (1-u)^2) >= 0,
// so g_eps <= min(1/eps, 1/s) pointwise.  The slope bound g' >= -4/(9 eps^2)
// is attained only at s = 3eps/2.  The two algebraic forms below keep the
// inequalities m >= s and m >= eps exact in floating point as well.
// ---------------------------------------------------------------------------
inline double g_eps(double s, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("g_eps: eps must be > 0");
  if (s < 0.0) throw std::invalid_argument("g_eps: s must be >= 0");
  if (s <= 0.5 * eps) return 1.0 / eps;
  if (s >= 1.5 * eps) return 1.0 / s;
  const double u = (s - 0.5 * eps) / eps;
  const double omu = 1.0 - u;
  const double m_from_s = s + eps * omu * omu * (0.5 + 0.3 * u * u);
  const double m_from_eps = eps * (1.0 + u * u * (0.5 + 0.3 * omu * omu));
  return 1.0 / std::max(m_from_s, m_from_eps);
}

// G_eps(s) = int_0^s t g_eps(t) dt, the convex potential behind the yield part
// (d/dA of tau* G_eps(|A|) is tau* g_eps(|A|) A).  The blend segment has no
// elementary antiderivative; a 16-point Gauss-Legendre rule on the smooth
// integrand (analytic, denominator in [1, 3/2]) is accurate to machine
// precision.
namespace detail {
// 16-point Gauss-Legendre nodes/weights on [0,1] (symmetric pairs).
inline const double* gl16_nodes() {
  static const double x[16] = {
      0.0052995325041750337, 0.0277124884633837046, 0.0671843988060841224, 0.1222977958224984868,
      0.1910618777986781147, 0.2709916111713863151, 0.3591982246103705422, 0.4524937450811812866,
      0.5475062549188187134, 0.6408017753896294578, 0.7290083888286136849, 0.8089381222013218853,
      0.8777022041775015132, 0.9328156011939158776, 0.9722875115366162954, 0.9947004674958249663};
  return x;
}
inline const double* gl16_weights() {
  static const double w[16] = {
      0.0135762297058770482, 0.0311267619693239468, 0.0475792558412463928, 0.0623144856277669384,
      0.0747979944082883680, 0.0845782596975012679, 0.0913017075224617918, 0.0947253052275342510,
      0.0947253052275342510, 0.0913017075224617918, 0.0845782596975012679, 0.0747979944082883680,
      0.0623144856277669384, 0.0475792558412463928, 0.0311267619693239468, 0.0135762297058770482};
  return w;
}
// int_0^us (1/2 + u) / (1 + u^2/2 + 0.3 u^2 (1-u)^2) du
inline double blend_potential_integral(double us) {
  const double* x = gl16_nodes();
  const double* w = gl16_weights();
  double acc = 0.0;
  for (int k = 0; k < 16; ++k) {
    const double u = us * x[k];
    const double omu = 1.0 - u;
    const double M = 1.0 + u * u * (0.5 + 0.3 * omu * omu);
    acc += w[k] * (0.5 + u) / M;
  }
  return us * acc;
}
} // namespace detail

inline double g_eps_potential(double s, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("g_eps_potential: eps must be > 0");
  if (s < 0.0) throw std::invalid_argument("g_eps_potential: s must be >= 0");
  const double half = 0.5 * eps;
  if (s <= half) return s * s / (2.0 * eps);
  const double G_half = 0.125 * eps; // (eps/2)^2 / (2 eps)
  if (s < 1.5 * eps) return G_half + eps * detail::blend_potential_integral((s - half) / eps);
  static const double I_full = detail::blend_potential_integral(1.0);
  return G_half + eps * I_full + (s - 1.5 * eps);
}

template <int D> struct HBStress {
  Eigen::Matrix<double, D, D> total;  // nu |A|^{r-2} A + P_part
  Eigen::Matrix<double, D, D> p_part; // tau* g_eps(|A|) A
};

// Regularized Herschel-Bulkley stress.  |p_part| <= tau* with equality on the
// saturated branch |A| >= 3 eps/2, and p_part : A >= 0.
template <typename Derived>
HBStress<Derived::RowsAtCompileTime> stress_hb_reg(const Eigen::MatrixBase<Derived>& A,
                                                   const HBRegParams& p) {
  constexpr int D = Derived::RowsAtCompileTime;
  using Mat = Eigen::Matrix<double, D, D>;
  HBStress<D> out;
  const double nA = A.norm();
  out.p_part = p.tau_star * g_eps(nA, p.eps_reg) * A;
  out.total = out.p_part;
  if (nA > 0.0) out.total += p.nu * std::pow(nA, p.r - 2.0) * A;
  return out;
}

template <typename Derived>
double hb_potential(const Eigen::MatrixBase<Derived>& A, const HBRegParams& p) {
  const double nA = A.norm();
  return (p.nu / p.r) * std::pow(nA, p.r) + p.tau_star * g_eps_potential(nA, p.eps_reg);
}

// ---------------------------------------------------------------------------
// Admissible exponent ranges and the dual integrability exponents.
// ---------------------------------------------------------------------------
struct AdmissibilityReport {
  bool admissible = false;
  std::string branch;        // "subcritical" (r < d), "large-r" (r >= d), or "none"
  double r_lower = 0.0;      // 3d/(d+2)
  double gamma_lower = 0.0;  // NaN when no gamma admits the given r
  double q1_star = std::numeric_limits<double>::quiet_NaN();
  double q2_star = std::numeric_limits<double>::quiet_NaN();
  bool open_ended = false;   // r == d: q* is a supremum, not attained
};

struct DualExponents {
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double q2 = std::numeric_limits<double>::quiet_NaN();
  bool open_ended = false;
};

inline DualExponents dual_exponents_unchecked(int d, double r, double gamma) {
  DualExponents q;
  const double dd = static_cast<double>(d);
  if (r < dd) {
    q.q1 = 1.0 / (1.0 / r - 1.0 / dd + (r - 1.0) / (r * gamma));
    q.q2 = 1.0 / (2.0 / r - 2.0 / dd + (r - 1.0) / (r * gamma));
  } else {
    q.q1 = q.q2 = r * gamma / (r - 1.0);
    q.open_ended = (r == dd);
  }
  return q;
}

inline AdmissibilityReport admissible(int d, double r, double gamma) {
  if (d != 2 && d != 3) throw std::invalid_argument("admissible: d must be 2 or 3");
  AdmissibilityReport rep;
  const double dd = static_cast<double>(d);
  rep.r_lower = 3.0 * dd / (dd + 2.0);
  if (!(r > 1.0) || !(gamma > 0.0)) {
    rep.branch = "none";
    rep.gamma_lower = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  if (r >= dd) {
    rep.branch = "large-r";
    rep.gamma_lower = 1.0;
    rep.admissible = gamma > 1.0;
  } else if (r > rep.r_lower) {
    rep.branch = "subcritical";
    rep.gamma_lower = dd * (r - 1.0) / ((dd + 2.0) * r - 3.0 * dd);
    rep.admissible = gamma > rep.gamma_lower;
  } else {
    rep.branch = "none";
    rep.gamma_lower = std::numeric_limits<double>::quiet_NaN();
  }
  if (rep.admissible) {
    const DualExponents q = dual_exponents_unchecked(d, r, gamma);
    rep.q1_star = q.q1;
    rep.q2_star = q.q2;
    rep.open_ended = q.open_ended;
  }
  return rep;
}

inline DualExponents dual_exponents(int d, double r, double gamma) {
  const AdmissibilityReport rep = admissible(d, r, gamma);
  if (!rep.admissible)
    throw std::invalid_argument("dual_exponents: (d, r, gamma) outside the admissible range");
  return dual_exponents_unchecked(d, r, gamma);
}

} // namespace nnflow
