#pragma once

#include <complex>
#include <vector>

#include "lrgw/errors.hpp"
#include "lrgw/grid.hpp"

namespace lrgw {

using cplx = std::complex<double>;

enum class DftDirection { forward, inverse };

namespace detail {

// Dense unitary 1D transform matrix of order n: W(k,j) = e^{∓2πi kj/n}/√n.
inline std::vector<cplx> dft_twiddles(int n, DftDirection dir) {
  std::vector<cplx> w(static_cast<std::size_t>(n) * n);
  const double two_pi = 6.283185307179586476925286766559;
  const double sgn = (dir == DftDirection::forward) ? -1.0 : 1.0;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      double ang = sgn * two_pi * static_cast<double>(k) * j / n;
      w[static_cast<std::size_t>(k) * n + j] =
          scale * cplx(std::cos(ang), std::sin(ang));
    }
  return w;
}

}  // namespace detail

// Unitary 3D discrete Fourier transform over the grid, applied axis by axis
// with dense 1D transforms. Direct evaluation is plenty at desk scale
// (N_r <= 4096); inverse(forward(x)) == x to machine precision.
inline std::vector<cplx> dft(const Grid& grid, const std::vector<cplx>& x,
                             DftDirection dir) {
  const int n_r = grid.n_r();
  if (static_cast<int>(x.size()) != n_r)
    throw invalid_input("dft: vector length does not match grid");

  std::vector<cplx> a = x;
  std::vector<cplx> line, out;
  int inner = 1;  // product of dims before the current axis
  for (int axis = 0; axis < 3; ++axis) {
    const int n = grid.dims[axis];
    const auto w = detail::dft_twiddles(n, dir);
    const int outer = n_r / (inner * n);
    line.assign(n, cplx{});
    out.assign(n, cplx{});
    for (int o = 0; o < outer; ++o) {
      for (int in = 0; in < inner; ++in) {
        const int base = o * inner * n + in;
        for (int j = 0; j < n; ++j) line[j] = a[base + j * inner];
        for (int k = 0; k < n; ++k) {
          cplx s{};
          const cplx* wk = w.data() + static_cast<std::size_t>(k) * n;
          for (int j = 0; j < n; ++j) s += wk[j] * line[j];
          out[k] = s;
        }
        for (int k = 0; k < n; ++k) a[base + k * inner] = out[k];
      }
    }
    inner *= n;
  }
  return a;
}

}  // namespace lrgw
