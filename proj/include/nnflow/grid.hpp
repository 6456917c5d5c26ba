#pragma once

// Uniform cell-centered structured grid on a rectangle (0,lx) x (0,ly)
// (x (0,lz) for Dim = 3).  Cell (i,j[,k]) has center ((i+1/2)hx, (j+1/2)hy, ...)
// and linear index i + nx*(j + ny*k) (x fastest).  A periodic variant turns the
// rectangle into a torus; it exists for oracle tests that need boundary-free
// identities and is never used by the production solver path.

#include <array>
#include <cstdint>
#include <stdexcept>

namespace nnflow {

template <int Dim> struct Grid {
  static_assert(Dim == 2 || Dim == 3, "Grid supports Dim = 2 or 3");

  using coord_type = std::array<int, Dim>;

  std::array<int, Dim> n{};
  std::array<double, Dim> extent{};
  bool periodic = false;

  Grid() = default;
  Grid(std::array<int, Dim> n_, std::array<double, Dim> extent_, bool periodic_ = false)
      : n(n_), extent(extent_), periodic(periodic_) {
    validate();
  }

  void validate() const {
    for (int a = 0; a < Dim; ++a) {
      // one-sided second-order boundary stencils need 4 cells per axis
      if (n[a] < 4) throw std::invalid_argument("Grid: need at least 4 cells per axis");
      if (!(extent[a] > 0.0)) throw std::invalid_argument("Grid: extents must be positive");
    }
  }

  int cells() const {
    int c = 1;
    for (int a = 0; a < Dim; ++a) c *= n[a];
    return c;
  }
  double h(int axis) const { return extent[axis] / n[axis]; }
  double min_h() const {
    double m = h(0);
    for (int a = 1; a < Dim; ++a) m = std::min(m, h(a));
    return m;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= h(a);
    return v;
  }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= extent[a];
    return v;
  }

  int index(const std::array<int, Dim>& c) const {
    int idx = c[Dim - 1];
    for (int a = Dim - 2; a >= 0; --a) idx = idx * n[a] + c[a];
    return idx;
  }
  std::array<int, Dim> coords(int idx) const {
    std::array<int, Dim> c{};
    for (int a = 0; a < Dim; ++a) {
      c[a] = idx % n[a];
      idx /= n[a];
    }
    return c;
  }

  double center(int axis, int i) const { return (i + 0.5) * h(axis); }
  std::array<double, Dim> cell_center(int idx) const {
    const auto c = coords(idx);
    std::array<double, Dim> x{};
    for (int a = 0; a < Dim; ++a) x[a] = center(a, c[a]);
    return x;
  }

  // distance from the cell center to the rectangle boundary (+inf on a torus,
  // represented by the largest double so masks stay all-true)
  double boundary_distance(int idx) const {
    if (periodic) return 1e+300;
    const auto c = coords(idx);
    double d = 1e+300;
    for (int a = 0; a < Dim; ++a) {
      const double x = center(a, c[a]);
      d = std::min(d, std::min(x, extent[a] - x));
    }
    return d;
  }

  bool on_boundary_ring(int idx) const {
    if (periodic) return false;
    const auto c = coords(idx);
    for (int a = 0; a < Dim; ++a)
      if (c[a] == 0 || c[a] == n[a] - 1) return true;
    return false;
  }

  bool same_layout(const Grid& o) const {
    return n == o.n && extent == o.extent && periodic == o.periodic;
  }
};

} // namespace nnflow
