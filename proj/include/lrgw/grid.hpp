#pragma once

#include <array>
#include <cmath>

#include "lrgw/errors.hpp"

namespace lrgw {

// Uniform periodic real-space grid over an orthorhombic cell.
// Linear index convention: n = i1 + n1*(i2 + n2*i3), i1 fastest.
struct Grid {
  std::array<int, 3> dims{};
  std::array<double, 3> cell{};  // edge lengths, bohr

  Grid() = default;
  Grid(std::array<int, 3> d, std::array<double, 3> c) : dims(d), cell(c) {
    for (int k = 0; k < 3; ++k) {
      if (dims[k] < 2) throw invalid_input("Grid: all dims must be >= 2");
      if (!(cell[k] > 0.0)) throw invalid_input("Grid: cell lengths must be > 0");
    }
  }

  int n_r() const { return dims[0] * dims[1] * dims[2]; }
  double volume() const { return cell[0] * cell[1] * cell[2]; }
  double dv() const { return volume() / n_r(); }

  // Signed frequency m for 1D index k on an n-point grid (standard DFT
  // ordering: 0, 1, ..., n/2, -(n/2-1), ..., -1).
  static int freq(int k, int n) { return (k <= n / 2) ? k : k - n; }

  // |G|^2 for the reciprocal vector at linear index idx.
  double g_norm2(int idx) const {
    int i1 = idx % dims[0];
    int i2 = (idx / dims[0]) % dims[1];
    int i3 = idx / (dims[0] * dims[1]);
    const double two_pi = 6.283185307179586476925286766559;
    double g1 = two_pi * freq(i1, dims[0]) / cell[0];
    double g2 = two_pi * freq(i2, dims[1]) / cell[1];
    double g3 = two_pi * freq(i3, dims[2]) / cell[2];
    return g1 * g1 + g2 * g2 + g3 * g3;
  }

  bool operator==(const Grid& o) const {
    return dims == o.dims && cell == o.cell;
  }
};

}  // namespace lrgw
