#pragma once

// Deterministic test-data generators: seeded random matrices and fields, and
// the fixed 20-member forcing corpus used by the divergence-inverse check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "nnflow/fields.hpp"
#include "nnflow/grid.hpp"

namespace nnflow::corpus {

inline std::mt19937_64 seeded(std::uint64_t salt) {
  return std::mt19937_64(0x6e6e666c6f77ULL ^ (salt * 0x9e3779b97f4a7c15ULL));
}

// symmetric matrix with entries uniform in [-scale, scale]
template <int Dim>
Eigen::Matrix<double, Dim, Dim> random_sym(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::Matrix<double, Dim, Dim> a;
  for (int i = 0; i < Dim; ++i)
    for (int j = i; j < Dim; ++j) a(i, j) = a(j, i) = u(rng);
  return a;
}

namespace detail {
// one random separable trig mode; periodic grids get full waves only so the
// sample stays smooth across the wrap
template <int Dim>
std::function<double(const std::array<double, Dim>&)>
random_mode(const Grid<Dim>& g, std::mt19937_64& rng, int kmax) {
  std::uniform_int_distribution<int> ki(1, kmax);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  std::array<double, Dim> freq{}, phase{};
  for (int i = 0; i < Dim; ++i) {
    const double base = (g.periodic ? 2.0 : 1.0) * std::numbers::pi / g.extent[i];
    freq[i] = base * ki(rng);
    phase[i] = g.periodic ? ph(rng) : 0.0; // zero phase keeps sin-modes edge-vanishing
  }
  std::uniform_int_distribution<int> coin(0, 1);
  std::array<int, Dim> use_cos{};
  for (int i = 0; i < Dim; ++i) use_cos[i] = g.periodic ? 0 : coin(rng);
  return [freq, phase, use_cos](const std::array<double, Dim>& x) {
    double v = 1.0;
    for (int i = 0; i < Dim; ++i)
      v *= use_cos[i] ? std::cos(freq[i] * x[i]) : std::sin(freq[i] * x[i] + phase[i]);
    return v;
  };
}
} // namespace detail

// offset + amp * (average of `terms` random separable trig modes)
template <int Dim>
ScalarField<Dim> random_trig_scalar(const Grid<Dim>& g, std::mt19937_64& rng, int kmax,
                                    double amp, double offset = 0.0, int terms = 4) {
  std::vector<std::function<double(const std::array<double, Dim>&)>> modes;
  std::vector<double> coef;
  std::uniform_real_distribution<double> cf(-1.0, 1.0);
  for (int t = 0; t < terms; ++t) {
    modes.push_back(detail::random_mode(g, rng, kmax));
    coef.push_back(cf(rng));
  }
  ScalarField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto x = g.cell_center(c);
    double v = 0.0;
    for (int t = 0; t < terms; ++t) v += coef[t] * modes[t](x);
    out.v[c] = offset + amp * v / static_cast<double>(terms);
  }
  return out;
}

template <int Dim>
VectorField<Dim> random_trig_velocity(const Grid<Dim>& g, std::mt19937_64& rng, int kmax,
                                      double amp, int terms = 3) {
  VectorField<Dim> out(g);
  for (int i = 0; i < Dim; ++i) {
    ScalarField<Dim> comp = random_trig_scalar(g, rng, kmax, amp, 0.0, terms);
    out.v.col(i) = comp.v;
  }
  return out;
}

// exactly divergence-free periodic field: u = (d_y psi, -d_x psi) for a random
// trig stream function, with the derivatives taken analytically
inline VectorField<2> divfree_velocity(const Grid<2>& g, std::mt19937_64& rng, int kmax,
                                       double amp) {
  if (!g.periodic)
    throw std::invalid_argument("divfree_velocity: periodic grid required");
  std::uniform_int_distribution<int> ki(1, kmax);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi), cf(-1.0, 1.0);
  constexpr int terms = 3;
  double kx[terms], ky[terms], px[terms], py[terms], c[terms];
  for (int t = 0; t < terms; ++t) {
    kx[t] = 2.0 * std::numbers::pi * ki(rng) / g.extent[0];
    ky[t] = 2.0 * std::numbers::pi * ki(rng) / g.extent[1];
    px[t] = ph(rng);
    py[t] = ph(rng);
    c[t] = cf(rng) * amp / terms;
  }
  VectorField<2> out(g);
  for (int cell = 0; cell < g.cells(); ++cell) {
    const auto x = g.cell_center(cell);
    double ux = 0.0, uy = 0.0;
    for (int t = 0; t < terms; ++t) {
      // psi_t = c sin(kx x + px) sin(ky y + py)
      ux += c[t] * ky[t] * std::sin(kx[t] * x[0] + px[t]) * std::cos(ky[t] * x[1] + py[t]);
      uy -= c[t] * kx[t] * std::cos(kx[t] * x[0] + px[t]) * std::sin(ky[t] * x[1] + py[t]);
    }
    out.v(cell, 0) = ux;
    out.v(cell, 1) = uy;
  }
  return out;
}

// The fixed forcing corpus for the divergence-inverse accuracy gate: 20 smooth
// members, each normalized to exact zero mean on the given grid. Composition
// rationale: the discrete one-sided divergence rows lose accuracy when the
// forcing is large at domain corners (weak corner singularity of the
// reconstructed field) or oscillates above ~4 half-waves per unit length
// (stencil truncation h^2 f''), so every member vanishes at the four corners
// after mean removal and keeps its modes at 4 or below. Edge-interior values
// are unconstrained (several members are O(1) on whole edges).
inline std::vector<ScalarField<2>> bogovskii_corpus(const Grid<2>& g) {
  using std::cos;
  using std::exp;
  using std::sin;
  const double P = std::numbers::pi;
  using F2 = std::function<double(double, double)>;
  const std::vector<F2> fns = {
      [=](double x, double y) { return sin(2 * P * x) * cos(P * y); },
      [=](double x, double y) { return cos(P * x) * sin(2 * P * y); },
      [=](double x, double y) { return sin(2 * P * x) * sin(2 * P * y); },
      [=](double x, double y) { return sin(P * x) * sin(P * y) * (2 * x - 1); },
      [=](double x, double y) { return sin(P * x) * sin(2 * P * y); },
      [=](double x, double y) { return sin(3 * P * x) * sin(P * y); },
      [=](double x, double y) { return sin(2 * P * x) * cos(2 * P * y); },
      [=](double x, double y) { return cos(2 * P * x) * sin(2 * P * y); },
      [=](double x, double y) { return sin(3 * P * x) * sin(3 * P * y); },
      [=](double x, double y) { return sin(4 * P * x) * sin(2 * P * y); },
      [=](double x, double y) { return sin(P * x) * sin(3 * P * y); },
      [=](double x, double y) {
        const double e = y * (1 - y);
        return 25.0 * sin(2 * P * x) * e * e;
      },
      [=](double x, double y) {
        return exp(-40.0 * ((x - .5) * (x - .5) + (y - .5) * (y - .5)));
      },
      [=](double x, double y) {
        return exp(-60.0 * ((x - .3) * (x - .3) + (y - .6) * (y - .6)));
      },
      [=](double x, double y) {
        return exp(-(30.0 * (x - .62) * (x - .62) + 70.0 * (y - .4) * (y - .4)));
      },
      [=](double x, double y) {
        return exp(-50.0 * ((x - .25) * (x - .25) + (y - .25) * (y - .25))) -
               exp(-50.0 * ((x - .75) * (x - .75) + (y - .75) * (y - .75)));
      },
      [=](double x, double y) { return 30.0 * x * (1 - x) * y * (1 - y) * (x - y); },
      [=](double x, double y) {
        return 30.0 * x * (1 - x) * y * (1 - y) * (x - y) * exp(x + y);
      },
      [=](double x, double y) { return sin(P * x) * sin(P * y) * cos(2 * P * x); },
      [=](double x, double y) { return sin(2 * P * (x + y)); },
  };
  std::vector<ScalarField<2>> out;
  out.reserve(fns.size());
  for (const auto& f : fns) {
    ScalarField<2> z(g);
    for (int c = 0; c < g.cells(); ++c) {
      const auto x = g.cell_center(c);
      z.v[c] = f(x[0] / g.extent[0], x[1] / g.extent[1]);
    }
    z.v -= integral(z) / g.volume();
    out.push_back(std::move(z));
  }
  return out;
}

} // namespace nnflow::corpus
