#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrgw/dft.hpp"
#include "lrgw/errors.hpp"
#include "lrgw/grid.hpp"
#include "lrgw/linalg.hpp"
#include "lrgw/matrix.hpp"
#include "lrgw/parallel.hpp"
#include "lrgw/rng.hpp"

namespace lrgw {

// ---------------------------------------------------------------------------
// Electronic structure
// ---------------------------------------------------------------------------

// Real orthonormal wavefunctions on a periodic grid plus band data.
// Orthonormality is dV-weighted: psi^T psi * dV = I.
struct ElectronicStructure {
  Grid grid;
  Matrix psi;                    // N_r x (N_v + N_c), column k = psi_k
  std::vector<double> energies;  // hartree, ascending
  std::vector<double> vxc;       // hartree
  int n_v = 0;
  int n_c = 0;

  int n_bands() const { return n_v + n_c; }
  double gap() const { return energies[n_v] - energies[n_v - 1]; }

  Matrix occupied() const { return cols_block(psi, 0, n_v); }
  Matrix unoccupied() const { return cols_block(psi, n_v, n_c); }

  double orthonormality_defect() const {
    Matrix g = matmul_tn(psi, psi);
    const double dv = grid.dv();
    for (int j = 0; j < g.cols(); ++j) {
      for (int i = 0; i < g.rows(); ++i) g(i, j) *= dv;
      g(j, j) -= 1.0;
    }
    return frobenius_norm(g);
  }
};

// Seeded synthetic stand-in for KS-DFT output: band-limited Gaussian random
// fields made real, then QR-orthonormalized against the dV-weighted inner
// product. Occupied energies span [-bandwidth, 0], unoccupied
// [gap, gap + bandwidth], so the HOMO-LUMO gap is exactly `gap`.
inline ElectronicStructure build_synthetic_system(std::uint64_t seed,
                                                  const Grid& grid, int n_v,
                                                  int n_c, double gap,
                                                  double bandwidth) {
  if (!(gap > 0.0)) throw invalid_input("build_synthetic_system: gap must be > 0");
  if (!(bandwidth >= gap))
    throw invalid_input("build_synthetic_system: bandwidth must be >= gap");
  if (n_v < 1 || n_c < 1)
    throw invalid_input("build_synthetic_system: need n_v >= 1 and n_c >= 1");
  const int n_r = grid.n_r();
  const int nb = n_v + n_c;
  if (nb > n_r)
    throw invalid_input("build_synthetic_system: grid too small for band count");

  Rng rng(seed);

  // Low-pass width: a third of the smallest Nyquist |G| so fields stay smooth.
  const double pi = 3.14159265358979323846;
  double g_nyq = 1e300;
  for (int k = 0; k < 3; ++k)
    g_nyq = std::min(g_nyq, pi * grid.dims[k] / grid.cell[k]);
  const double sigma2 = (g_nyq / 3.0) * (g_nyq / 3.0);

  Matrix fields(n_r, nb);
  std::vector<cplx> coef(n_r);
  for (int b = 0; b < nb; ++b) {
    for (int idx = 0; idx < n_r; ++idx) {
      double env = std::exp(-grid.g_norm2(idx) / (2.0 * sigma2));
      coef[idx] = env * cplx(rng.gaussian(), rng.gaussian());
    }
    std::vector<cplx> real_space = dft(grid, coef, DftDirection::inverse);
    for (int idx = 0; idx < n_r; ++idx) fields(idx, b) = real_space[idx].real();
  }

  QrcpResult qr = qrcp(fields);
  for (int j = 0; j < nb; ++j)
    if (std::abs(qr.r(j, j)) < 1e-12)
      throw numeric_error(
          "build_synthetic_system: random fields are rank deficient; grid too "
          "small for band count");
  // QRCP permutes columns; bands are interchangeable random fields here, so
  // the orthonormal basis itself is what we keep.
  const double inv_sqrt_dv = 1.0 / std::sqrt(grid.dv());
  ElectronicStructure es;
  es.grid = grid;
  es.psi = Matrix(n_r, nb);
  for (int j = 0; j < nb; ++j)
    for (int i = 0; i < n_r; ++i) es.psi(i, j) = qr.q(i, j) * inv_sqrt_dv;

  es.n_v = n_v;
  es.n_c = n_c;
  es.energies.resize(nb);
  for (int i = 0; i < n_v; ++i)
    es.energies[i] =
        (n_v == 1) ? 0.0 : -bandwidth * (n_v - 1 - i) / double(n_v - 1);
  for (int j = 0; j < n_c; ++j)
    es.energies[n_v + j] =
        gap + ((n_c == 1) ? 0.0 : bandwidth * j / double(n_c - 1));
  es.vxc.assign(nb, 0.0);
  return es;
}

// ---------------------------------------------------------------------------
// Omega: diagonal of occupied-unoccupied energy differences.
// ---------------------------------------------------------------------------

// Entry for pair (i, j) at flat index i + n_v*j (i fastest) is e_i - e_{n_v+j};
// all entries are strictly negative for a gapped system.
struct OmegaDiagonal {
  std::vector<double> entries;

  double min_abs() const {
    double m = 1e300;
    for (double v : entries) m = std::min(m, std::abs(v));
    return m;
  }
};

inline OmegaDiagonal build_omega(const ElectronicStructure& es) {
  OmegaDiagonal w;
  w.entries.resize(static_cast<std::size_t>(es.n_v) * es.n_c);
  for (int j = 0; j < es.n_c; ++j)
    for (int i = 0; i < es.n_v; ++i) {
      double d = es.energies[i] - es.energies[es.n_v + j];
      if (!(d < 0.0))
        throw invalid_input("build_omega: system is not gapped");
      w.entries[i + static_cast<std::size_t>(es.n_v) * j] = d;
    }
  return w;
}

// ---------------------------------------------------------------------------
// Coulomb operator
// ---------------------------------------------------------------------------

enum class CoulombMode { reciprocal_diagonal, dense };

// Periodic bare Coulomb kernel v(G) = 4*pi/|G|^2 with v(0) = 0 (charge-neutral
// Gamma-point convention), applied either through the reciprocal-space
// diagonal or as a materialized dense symmetric matrix.
struct CoulombOperator {
  Grid grid;
  CoulombMode mode = CoulombMode::reciprocal_diagonal;
  std::vector<double> kernel;  // reciprocal diagonal, length N_r
  Matrix dense;                // only populated for dense mode
};

inline constexpr int kDenseCoulombGuard = 4096;

inline CoulombOperator build_coulomb(const Grid& grid, CoulombMode mode) {
  CoulombOperator v;
  v.grid = grid;
  v.mode = mode;
  const int n_r = grid.n_r();
  v.kernel.resize(n_r);
  const double four_pi = 12.566370614359172953850573533118;
  for (int idx = 0; idx < n_r; ++idx) {
    double g2 = grid.g_norm2(idx);
    v.kernel[idx] = (g2 > 0.0) ? four_pi / g2 : 0.0;
  }
  if (mode == CoulombMode::dense) {
    if (n_r > kDenseCoulombGuard)
      throw guard_exceeded("build_coulomb: dense mode refused for N_r > " +
                           std::to_string(kDenseCoulombGuard));
    // F^{-1} diag(v) F applied to identity columns; the result is real and
    // symmetric up to roundoff, which we enforce.
    v.dense = Matrix(n_r, n_r);
    std::vector<cplx> e(n_r);
    for (int j = 0; j < n_r; ++j) {
      std::fill(e.begin(), e.end(), cplx{});
      e[j] = 1.0;
      std::vector<cplx> t = dft(grid, e, DftDirection::forward);
      for (int k = 0; k < n_r; ++k) t[k] *= v.kernel[k];
      t = dft(grid, t, DftDirection::inverse);
      for (int i = 0; i < n_r; ++i) v.dense(i, j) = t[i].real();
    }
    symmetrize(v.dense);
  }
  return v;
}

// Zero interaction with the same interface; handy for degenerate-limit tests.
inline CoulombOperator zero_coulomb(const Grid& grid) {
  CoulombOperator v;
  v.grid = grid;
  v.mode = CoulombMode::reciprocal_diagonal;
  v.kernel.assign(grid.n_r(), 0.0);
  return v;
}

// V * X, column by column. Reciprocal mode transforms, scales, transforms
// back; dense mode multiplies.
inline Matrix apply_coulomb(const CoulombOperator& v, const Matrix& x,
                            int threads = 1) {
  const int n_r = v.grid.n_r();
  if (x.rows() != n_r) throw invalid_input("apply_coulomb: row count != N_r");
  if (v.mode == CoulombMode::dense) return matmul(v.dense, x);
  Matrix y(n_r, x.cols());
  parallel_for(x.cols(), threads, [&](int j) {
    std::vector<cplx> t(n_r);
    for (int i = 0; i < n_r; ++i) t[i] = x(i, j);
    t = dft(v.grid, t, DftDirection::forward);
    for (int k = 0; k < n_r; ++k) t[k] *= v.kernel[k];
    t = dft(v.grid, t, DftDirection::inverse);
    for (int i = 0; i < n_r; ++i) y(i, j) = t[i].real();
  });
  return y;
}

// Dense materialization of V regardless of mode (guarded).
inline Matrix coulomb_dense_matrix(const CoulombOperator& v) {
  if (v.mode == CoulombMode::dense) return v.dense;
  const int n_r = v.grid.n_r();
  if (n_r > kDenseCoulombGuard)
    throw guard_exceeded("coulomb_dense_matrix: N_r exceeds dense guard");
  Matrix d = apply_coulomb(v, Matrix::identity(n_r));
  symmetrize(d);
  return d;
}

// ---------------------------------------------------------------------------
// WFN1 file format
// ---------------------------------------------------------------------------
// Layout: 4 magic bytes "WFN1"; uint32 little-endian header length; UTF-8
// JSON header {dims:[n1,n2,n3], cell:[a,b,c], nv, nc}; float64 little-endian
// payload: psi column-major, then energies, then vxc.

namespace detail {

inline void write_f64(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p),
           static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_f64(std::istream& is, double* p, std::size_t n,
                     const char* what) {
  is.read(reinterpret_cast<char*>(p),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is || is.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
    throw io_error(std::string("load_system: truncated payload reading ") +
                   what);
}

}  // namespace detail

inline void save_system(const std::string& path,
                        const ElectronicStructure& es) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("save_system: cannot open " + path);
  os.write("WFN1", 4);
  nlohmann::json hdr;
  hdr["dims"] = es.grid.dims;
  hdr["cell"] = es.grid.cell;
  hdr["nr"] = es.grid.n_r();
  hdr["nv"] = es.n_v;
  hdr["nc"] = es.n_c;
  const std::string h = hdr.dump();
  const std::uint32_t len = static_cast<std::uint32_t>(h.size());
  unsigned char lb[4] = {static_cast<unsigned char>(len & 0xff),
                         static_cast<unsigned char>((len >> 8) & 0xff),
                         static_cast<unsigned char>((len >> 16) & 0xff),
                         static_cast<unsigned char>((len >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(lb), 4);
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  detail::write_f64(os, es.psi.data(), es.psi.size());
  detail::write_f64(os, es.energies.data(), es.energies.size());
  detail::write_f64(os, es.vxc.data(), es.vxc.size());
  if (!os) throw io_error("save_system: write failed for " + path);
}

inline ElectronicStructure load_system(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("load_system: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WFN1", 4) != 0)
    throw io_error("load_system: bad magic");
  unsigned char lb[4];
  is.read(reinterpret_cast<char*>(lb), 4);
  if (!is) throw io_error("load_system: truncated header length");
  const std::uint32_t len = static_cast<std::uint32_t>(lb[0]) |
                            (static_cast<std::uint32_t>(lb[1]) << 8) |
                            (static_cast<std::uint32_t>(lb[2]) << 16) |
                            (static_cast<std::uint32_t>(lb[3]) << 24);
  std::string h(len, '\0');
  is.read(h.data(), static_cast<std::streamsize>(len));
  if (!is) throw io_error("load_system: truncated header");

  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("load_system: malformed JSON header: ") +
                   e.what());
  }
  ElectronicStructure es;
  std::int64_t nr_declared = 0;
  try {
    std::array<int, 3> dims = hdr.at("dims");
    std::array<double, 3> cell = hdr.at("cell");
    es.grid = Grid(dims, cell);
    nr_declared = hdr.at("nr");
    es.n_v = hdr.at("nv");
    es.n_c = hdr.at("nc");
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("load_system: header field error: ") + e.what());
  } catch (const invalid_input& e) {
    throw io_error(std::string("load_system: inconsistent header: ") + e.what());
  }
  if (nr_declared != es.grid.n_r())
    throw io_error("load_system: header nr does not match dims product");
  if (es.n_v < 1 || es.n_c < 1 || es.n_bands() > es.grid.n_r())
    throw io_error("load_system: inconsistent header band counts");

  const int n_r = es.grid.n_r();
  const int nb = es.n_bands();
  es.psi = Matrix(n_r, nb);
  es.energies.resize(nb);
  es.vxc.resize(nb);
  detail::read_f64(is, es.psi.data(), es.psi.size(), "psi");
  detail::read_f64(is, es.energies.data(), nb, "energies");
  detail::read_f64(is, es.vxc.data(), nb, "vxc");
  return es;
}

}  // namespace lrgw
