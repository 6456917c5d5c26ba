#pragma once

// Discrete mollification and interior truncation.
//
// The kernel samples the quartic bump (1 - (|x|/delta)^2)^2 at cell-offset
// centers and renormalizes so the stencil sums to exactly 1 (the continuum
// normalization constant never enters).  Convolution treats values outside a
// rectangle as zero and wraps on a torus.  Offsets come in +/- pairs, so the
// discrete kernel has vanishing first moment like its continuum counterpart.
//
// truncate(f, delta) multiplies by the indicator of the 2*delta-interior;
// composed with mollification at radius delta the result vanishes within
// distance delta of the boundary, which is what every transport field fed to
// the continuity solver looks like.

#include "nnflow/fields.hpp"

#include <vector>

namespace nnflow {

template <int Dim> struct MollifyKernel {
  const Grid<Dim>* grid = nullptr;
  double delta = 0.0;
  bool identity = true;   // true when delta resolves no neighbor offsets
  bool resolvable = true; // false when 0 < delta < h (degraded to identity)
  std::vector<std::array<int, Dim>> offsets;
  std::vector<double> weights;

  MollifyKernel(const Grid<Dim>& g, double d) : grid(&g), delta(d) {
    if (d < 0.0) throw std::invalid_argument("MollifyKernel: delta must be >= 0");
    if (d == 0.0) return; // identity by definition
    double hmax = 0.0;
    for (int a = 0; a < Dim; ++a) hmax = std::max(hmax, g.h(a));
    resolvable = d >= hmax;

    std::array<int, Dim> radius{};
    for (int a = 0; a < Dim; ++a) radius[a] = static_cast<int>(d / g.h(a));
    double total = 0.0;
    std::array<int, Dim> k{};
    for (int a = 0; a < Dim; ++a) k[a] = -radius[a];
    while (true) {
      double r2 = 0.0;
      for (int a = 0; a < Dim; ++a) {
        const double x = k[a] * g.h(a);
        r2 += x * x;
      }
      const double t = r2 / (d * d);
      if (t < 1.0) {
        const double w = (1.0 - t) * (1.0 - t);
        offsets.push_back(k);
        weights.push_back(w);
        total += w;
      }
      int a = 0;
      while (a < Dim && ++k[a] > radius[a]) k[a++] = -radius[a];
      if (a == Dim) break;
    }
    for (double& w : weights) w /= total;
    identity = offsets.size() <= 1;
    if (identity) {
      offsets.clear();
      weights.clear();
    }
  }

  template <typename Data> Data apply_columns(const Data& in) const {
    if (identity) return in;
    const Grid<Dim>& g = *grid;
    Data out = Data::Zero(in.rows(), in.cols());
    for (int c = 0; c < g.cells(); ++c) {
      const auto cc = g.coords(c);
      for (size_t m = 0; m < offsets.size(); ++m) {
        std::array<int, Dim> nb = cc;
        bool inside = true;
        for (int a = 0; a < Dim; ++a) {
          nb[a] += offsets[m][a];
          if (g.periodic) {
            nb[a] = ((nb[a] % g.n[a]) + g.n[a]) % g.n[a];
          } else if (nb[a] < 0 || nb[a] >= g.n[a]) {
            inside = false; // zero extension
            break;
          }
        }
        if (inside) out.row(c) += weights[m] * in.row(g.index(nb));
      }
    }
    return out;
  }
};

template <int Dim> ScalarField<Dim> mollify(const ScalarField<Dim>& f, const MollifyKernel<Dim>& k) {
  detail::require(f.grid == k.grid || f.grid->same_layout(*k.grid), "mollify: grid mismatch");
  ScalarField<Dim> out(*f.grid);
  Eigen::MatrixXd tmp = k.apply_columns(Eigen::MatrixXd(f.v.matrix()));
  out.v = tmp.col(0).array();
  return out;
}
template <int Dim> VectorField<Dim> mollify(const VectorField<Dim>& f, const MollifyKernel<Dim>& k) {
  detail::require(f.grid == k.grid || f.grid->same_layout(*k.grid), "mollify: grid mismatch");
  VectorField<Dim> out(*f.grid);
  out.v = k.apply_columns(f.v);
  return out;
}
template <int Dim> ScalarField<Dim> mollify(const ScalarField<Dim>& f, double delta) {
  return mollify(f, MollifyKernel<Dim>(*f.grid, delta));
}
template <int Dim> VectorField<Dim> mollify(const VectorField<Dim>& f, double delta) {
  return mollify(f, MollifyKernel<Dim>(*f.grid, delta));
}

template <int Dim> ScalarField<Dim> truncate(const ScalarField<Dim>& f, double delta) {
  if (delta < 0.0) throw std::invalid_argument("truncate: delta must be >= 0");
  const BoolArray mask = interior_mask(*f.grid, 2.0 * delta);
  ScalarField<Dim> out(*f.grid);
  out.v = mask.select(f.v, 0.0);
  return out;
}
template <int Dim> VectorField<Dim> truncate(const VectorField<Dim>& f, double delta) {
  if (delta < 0.0) throw std::invalid_argument("truncate: delta must be >= 0");
  const BoolArray mask = interior_mask(*f.grid, 2.0 * delta);
  VectorField<Dim> out(*f.grid);
  out.v = f.v;
  for (int c = 0; c < f.grid->cells(); ++c)
    if (!mask[c]) out.v.row(c).setZero();
  return out;
}

// grid enlarged by pad cells of the same spacing on every side
template <int Dim> Grid<Dim> padded_grid(const Grid<Dim>& g, int pad) {
  detail::require(pad >= 0, "padded_grid: pad must be >= 0");
  detail::require(!g.periodic, "padded_grid: padding a torus makes no sense");
  Grid<Dim> out = g;
  for (int a = 0; a < Dim; ++a) {
    out.n[a] = g.n[a] + 2 * pad;
    out.extent[a] = g.extent[a] + 2 * pad * g.h(a);
  }
  return out;
}

template <int Dim>
ScalarField<Dim> extend_zero(const ScalarField<Dim>& f, const Grid<Dim>& enlarged) {
  const Grid<Dim>& g = *f.grid;
  int pad = (enlarged.n[0] - g.n[0]) / 2;
  detail::require(pad >= 0, "extend_zero: enlarged grid smaller than source");
  for (int a = 0; a < Dim; ++a) {
    detail::require(enlarged.n[a] == g.n[a] + 2 * pad, "extend_zero: asymmetric padding");
    detail::require(std::abs(enlarged.h(a) - g.h(a)) <= 1e-14 * g.h(a),
                    "extend_zero: cell size mismatch");
  }
  ScalarField<Dim> out(enlarged);
  for (int c = 0; c < g.cells(); ++c) {
    auto cc = g.coords(c);
    for (int a = 0; a < Dim; ++a) cc[a] += pad;
    out.v[enlarged.index(cc)] = f.v[c];
  }
  return out;
}

} // namespace nnflow
