#pragma once

// Discrete differential operators: centered second-order differences in the
// interior, one-sided second-order (3-point) rows at the boundary, periodic
// wrap on a torus.  The same stencils feed the pointwise operators here and
// the Gram-matrix assembly of the momentum solver, so variational identities
// hold for one single discretization.
//
// With these stencils the operators are exact on affine fields everywhere
// (boundary rows included), and summation by parts
//   inner(divergence v, f) = -inner(v, grad f)
// holds to roundoff whenever v vanishes on a 3-cell collar at the boundary
// (one-sided rows reach two cells inward).

#include "nnflow/fields.hpp"

namespace nnflow {

struct DerivStencil {
  int count = 0;
  std::array<int, 3> cell{};  // linear indices
  std::array<double, 3> w{};
};

template <int Dim>
DerivStencil deriv_stencil(const Grid<Dim>& g, int axis,
                           const typename Grid<Dim>::coord_type& c0) {
  auto c = c0;
  const double h = g.h(axis);
  const int i = c[axis];
  const int na = g.n[axis];
  DerivStencil s;
  auto at = [&](int ia) {
    auto cc = c;
    cc[axis] = ia;
    return g.index(cc);
  };
  if (g.periodic) {
    s.count = 2;
    s.cell = {at((i - 1 + na) % na), at((i + 1) % na), 0};
    s.w = {-0.5 / h, 0.5 / h, 0.0};
    return s;
  }
  if (i == 0) {
    s.count = 3;
    s.cell = {at(0), at(1), at(2)};
    s.w = {-1.5 / h, 2.0 / h, -0.5 / h};
  } else if (i == na - 1) {
    s.count = 3;
    s.cell = {at(na - 1), at(na - 2), at(na - 3)};
    s.w = {1.5 / h, -2.0 / h, 0.5 / h};
  } else {
    s.count = 2;
    s.cell = {at(i - 1), at(i + 1), 0};
    s.w = {-0.5 / h, 0.5 / h, 0.0};
  }
  return s;
}

namespace detail {
template <int Dim, typename Col>
double apply_stencil(const DerivStencil& s, const Col& col) {
  double acc = 0.0;
  for (int k = 0; k < s.count; ++k) acc += s.w[k] * col[s.cell[k]];
  return acc;
}
} // namespace detail

template <int Dim> VectorField<Dim> grad(const ScalarField<Dim>& f) {
  const Grid<Dim>& g = *f.grid;
  VectorField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto cc = g.coords(c);
    for (int a = 0; a < Dim; ++a)
      out.v(c, a) = detail::apply_stencil<Dim>(deriv_stencil(g, a, cc), f.v);
  }
  return out;
}

template <int Dim> ScalarField<Dim> divergence(const VectorField<Dim>& u) {
  const Grid<Dim>& g = *u.grid;
  ScalarField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto cc = g.coords(c);
    double acc = 0.0;
    for (int a = 0; a < Dim; ++a)
      acc += detail::apply_stencil<Dim>(deriv_stencil(g, a, cc), u.v.col(a));
    out.v[c] = acc;
  }
  return out;
}

// row-wise divergence of a tensor field: out_i = d_j T_ij
template <int Dim> VectorField<Dim> divergence(const TensorField<Dim>& T) {
  const Grid<Dim>& g = *T.grid;
  VectorField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto cc = g.coords(c);
    std::array<DerivStencil, Dim> st;
    for (int a = 0; a < Dim; ++a) st[a] = deriv_stencil(g, a, cc);
    for (int i = 0; i < Dim; ++i) {
      double acc = 0.0;
      for (int j = 0; j < Dim; ++j) acc += detail::apply_stencil<Dim>(st[j], T.v.col(i * Dim + j));
      out.v(c, i) = acc;
    }
  }
  return out;
}

template <int Dim> TensorField<Dim> grad_tensor(const VectorField<Dim>& u) {
  const Grid<Dim>& g = *u.grid;
  TensorField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto cc = g.coords(c);
    for (int a = 0; a < Dim; ++a) {
      const DerivStencil s = deriv_stencil(g, a, cc);
      for (int i = 0; i < Dim; ++i)
        out.v(c, i * Dim + a) = detail::apply_stencil<Dim>(s, u.v.col(i));
    }
  }
  return out;
}

template <int Dim> SymTensorField<Dim> sym_grad(const VectorField<Dim>& u) {
  const Grid<Dim>& g = *u.grid;
  SymTensorField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) {
    const auto cc = g.coords(c);
    std::array<DerivStencil, Dim> st;
    for (int a = 0; a < Dim; ++a) st[a] = deriv_stencil(g, a, cc);
    for (int i = 0; i < Dim; ++i)
      for (int j = i; j < Dim; ++j) {
        const double dij = detail::apply_stencil<Dim>(st[j], u.v.col(i));
        const double dji = detail::apply_stencil<Dim>(st[i], u.v.col(j));
        out.v(c, sym_index<Dim>(i, j)) = 0.5 * (dij + dji);
      }
  }
  return out;
}

// discrete W^{1,p} norm (||u||_p^p + ||grad u||_p^p)^{1/p}
template <int Dim> double sobolev_norm(const VectorField<Dim>& u, double p) {
  const TensorField<Dim> G = grad_tensor(u);
  const double a = lebesgue_norm(u, p);
  const double b = lebesgue_norm(G, p);
  if (std::isinf(p)) return std::max(a, b);
  return std::pow(std::pow(a, p) + std::pow(b, p), 1.0 / p);
}

} // namespace nnflow
