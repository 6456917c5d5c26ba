#pragma once

// Discrete fields over a Grid: scalar, vector, symmetric-tensor and full-tensor
// values stored row-per-cell in Eigen arrays, plus Lebesgue norms, inner
// products and sampling helpers.  Fields keep a pointer to their grid; every
// binary operation checks layout compatibility.

#include "nnflow/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace nnflow {

namespace detail {
inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
} // namespace detail

template <int Dim> constexpr int sym_comps() { return Dim * (Dim + 1) / 2; }

// symmetric component order: 2D [xx, yy, xy]; 3D [xx, yy, zz, xy, xz, yz]
template <int Dim> constexpr int sym_index(int i, int j) {
  if (i == j) return i;
  const int a = i < j ? i : j;
  const int b = i < j ? j : i;
  if constexpr (Dim == 2) {
    (void)a; (void)b;
    return 2;
  } else {
    return 2 + a + b; // (0,1)->3, (0,2)->4, (1,2)->5
  }
}

template <int Dim> struct ScalarField {
  const Grid<Dim>* grid = nullptr;
  Eigen::ArrayXd v;

  ScalarField() = default;
  explicit ScalarField(const Grid<Dim>& g) : grid(&g), v(Eigen::ArrayXd::Zero(g.cells())) {}
  ScalarField(const Grid<Dim>& g, double c) : grid(&g), v(Eigen::ArrayXd::Constant(g.cells(), c)) {}
};

template <int Dim> struct VectorField {
  const Grid<Dim>* grid = nullptr;
  Eigen::Matrix<double, Eigen::Dynamic, Dim> v; // column per component

  VectorField() = default;
  explicit VectorField(const Grid<Dim>& g) : grid(&g) {
    v.setZero(g.cells(), Dim);
  }
  Eigen::Matrix<double, Dim, 1> at(int cell) const { return v.row(cell).transpose(); }
};

template <int Dim> struct SymTensorField {
  const Grid<Dim>* grid = nullptr;
  Eigen::Matrix<double, Eigen::Dynamic, sym_comps<Dim>()> v;

  SymTensorField() = default;
  explicit SymTensorField(const Grid<Dim>& g) : grid(&g) {
    v.setZero(g.cells(), sym_comps<Dim>());
  }

  Eigen::Matrix<double, Dim, Dim> at(int cell) const {
    Eigen::Matrix<double, Dim, Dim> A;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) A(i, j) = v(cell, sym_index<Dim>(i, j));
    return A;
  }
  void set(int cell, const Eigen::Matrix<double, Dim, Dim>& A) {
    for (int i = 0; i < Dim; ++i)
      for (int j = i; j < Dim; ++j) v(cell, sym_index<Dim>(i, j)) = A(i, j);
  }
  // |A|_F per cell (off-diagonal components count twice)
  double frob(int cell) const {
    double s = 0.0;
    for (int i = 0; i < Dim; ++i) {
      const double d = v(cell, i);
      s += d * d;
    }
    for (int c = Dim; c < sym_comps<Dim>(); ++c) {
      const double o = v(cell, c);
      s += 2.0 * o * o;
    }
    return std::sqrt(s);
  }
};

// full gradient tensor, component (i,j) = d_j u_i stored at column i*Dim + j
template <int Dim> struct TensorField {
  const Grid<Dim>* grid = nullptr;
  Eigen::Matrix<double, Eigen::Dynamic, Dim * Dim> v;

  TensorField() = default;
  explicit TensorField(const Grid<Dim>& g) : grid(&g) {
    v.setZero(g.cells(), Dim * Dim);
  }
  Eigen::Matrix<double, Dim, Dim> at(int cell) const {
    Eigen::Matrix<double, Dim, Dim> A;
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j) A(i, j) = v(cell, i * Dim + j);
    return A;
  }
  double frob(int cell) const { return v.row(cell).norm(); }
};

template <int Dim, typename FieldA, typename FieldB>
void check_same_grid(const FieldA& a, const FieldB& b, const char* what) {
  detail::require(a.grid != nullptr && b.grid != nullptr, "field without grid");
  if (a.grid == b.grid) return;
  if (!a.grid->same_layout(*b.grid)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

// --- sampling ---------------------------------------------------------------

template <int Dim>
ScalarField<Dim> sample_scalar(const Grid<Dim>& g,
                               const std::function<double(const std::array<double, Dim>&)>& f) {
  ScalarField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) out.v[c] = f(g.cell_center(c));
  return out;
}

template <int Dim>
VectorField<Dim> sample_vector(
    const Grid<Dim>& g,
    const std::function<Eigen::Matrix<double, Dim, 1>(const std::array<double, Dim>&)>& f) {
  VectorField<Dim> out(g);
  for (int c = 0; c < g.cells(); ++c) out.v.row(c) = f(g.cell_center(c)).transpose();
  return out;
}

// --- integrals, norms, inner products ---------------------------------------

template <int Dim> double integral(const ScalarField<Dim>& f) {
  return f.grid->cell_volume() * f.v.sum();
}

namespace detail {
template <int Dim, typename F>
double lebesgue_norm_impl(const Grid<Dim>& g, int cells, double p, F&& magnitude) {
  require(p >= 1.0 || std::isinf(p), "lebesgue_norm: p must be in [1, inf]");
  if (std::isinf(p)) {
    double m = 0.0;
    for (int c = 0; c < cells; ++c) m = std::max(m, magnitude(c));
    return m;
  }
  double acc = 0.0;
  for (int c = 0; c < cells; ++c) acc += std::pow(magnitude(c), p);
  return std::pow(g.cell_volume() * acc, 1.0 / p);
}
} // namespace detail

template <int Dim> double lebesgue_norm(const ScalarField<Dim>& f, double p) {
  return detail::lebesgue_norm_impl(*f.grid, f.grid->cells(), p,
                                    [&](int c) { return std::abs(f.v[c]); });
}
template <int Dim> double lebesgue_norm(const VectorField<Dim>& f, double p) {
  return detail::lebesgue_norm_impl(*f.grid, f.grid->cells(), p,
                                    [&](int c) { return f.v.row(c).norm(); });
}
template <int Dim> double lebesgue_norm(const SymTensorField<Dim>& f, double p) {
  return detail::lebesgue_norm_impl(*f.grid, f.grid->cells(), p, [&](int c) { return f.frob(c); });
}
template <int Dim> double lebesgue_norm(const TensorField<Dim>& f, double p) {
  return detail::lebesgue_norm_impl(*f.grid, f.grid->cells(), p, [&](int c) { return f.frob(c); });
}

template <int Dim> double inner(const ScalarField<Dim>& a, const ScalarField<Dim>& b) {
  check_same_grid<Dim>(a, b, "inner");
  return a.grid->cell_volume() * (a.v * b.v).sum();
}
template <int Dim> double inner(const VectorField<Dim>& a, const VectorField<Dim>& b) {
  check_same_grid<Dim>(a, b, "inner");
  return a.grid->cell_volume() * a.v.cwiseProduct(b.v).sum();
}
// Frobenius pairing A:B, off-diagonal symmetric components counted twice
template <int Dim> double inner(const SymTensorField<Dim>& a, const SymTensorField<Dim>& b) {
  check_same_grid<Dim>(a, b, "inner");
  double acc = 0.0;
  for (int c = 0; c < a.grid->cells(); ++c) {
    double s = 0.0;
    for (int i = 0; i < Dim; ++i) s += a.v(c, i) * b.v(c, i);
    for (int k = Dim; k < sym_comps<Dim>(); ++k) s += 2.0 * a.v(c, k) * b.v(c, k);
    acc += s;
  }
  return a.grid->cell_volume() * acc;
}

// --- interior masks ----------------------------------------------------------

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

// cells whose center is at distance >= dist from the boundary
template <int Dim> BoolArray interior_mask(const Grid<Dim>& g, double dist) {
  BoolArray m(g.cells());
  for (int c = 0; c < g.cells(); ++c) m[c] = g.boundary_distance(c) >= dist;
  return m;
}

// project onto the discrete homogeneous-Dirichlet space: zero every
// boundary-ring cell in place
template <int Dim> void zero_boundary_ring(VectorField<Dim>& u) {
  const Grid<Dim>& g = *u.grid;
  for (int c = 0; c < g.cells(); ++c)
    if (g.on_boundary_ring(c)) u.v.row(c).setZero();
}

} // namespace nnflow
