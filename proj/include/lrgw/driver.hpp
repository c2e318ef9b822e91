#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lrgw/contour.hpp"
#include "lrgw/gw.hpp"
#include "lrgw/isdf.hpp"
#include "lrgw/model.hpp"
#include "lrgw/smw.hpp"

namespace lrgw {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  // system: either a synthetic recipe or a wavefunction file
  std::uint64_t seed = 1;
  std::array<int, 3> dims = {8, 8, 8};
  std::array<double, 3> cell = {6.0, 6.0, 6.0};
  int n_v = 16;
  int n_c = 16;
  double gap = 1.0;
  double bandwidth = 4.0;
  std::string wfn_path;

  // isdf
  double k_vc = 8.0;
  double k_vn = 8.0;
  double k_nn = 8.0;
  PointSelector selector = PointSelector::qrcp_direct;

  // contour
  double delta_rel = 1e-7;
  int max_nodes = 1025;

  PipelineTag pipeline = PipelineTag::lowrank;
  int threads = 1;
  std::string out_dir = ".";

  // fault-injection hook used by the validation mutation test
  bool hook_flip_sex_x = false;
};

inline PointSelector selector_from_string(const std::string& s) {
  if (s == "qrcp_direct") return PointSelector::qrcp_direct;
  if (s == "qrcp_sketched") return PointSelector::qrcp_sketched;
  throw invalid_input("config: unknown selector '" + s + "'");
}

inline PipelineTag pipeline_from_string(const std::string& s) {
  if (s == "lowrank") return PipelineTag::lowrank;
  if (s == "isdf_conventional") return PipelineTag::isdf_conventional;
  if (s == "bruteforce") return PipelineTag::bruteforce;
  throw invalid_input("config: unknown pipeline '" + s + "'");
}

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  try {
    if (j.contains("system")) {
      const json& s = j.at("system");
      if (s.contains("wfn")) c.wfn_path = s.at("wfn").get<std::string>();
      if (s.contains("seed")) c.seed = s.at("seed").get<std::uint64_t>();
      if (s.contains("dims")) c.dims = s.at("dims").get<std::array<int, 3>>();
      if (s.contains("cell"))
        c.cell = s.at("cell").get<std::array<double, 3>>();
      if (s.contains("nv")) c.n_v = s.at("nv").get<int>();
      if (s.contains("nc")) c.n_c = s.at("nc").get<int>();
      if (s.contains("gap")) c.gap = s.at("gap").get<double>();
      if (s.contains("bandwidth"))
        c.bandwidth = s.at("bandwidth").get<double>();
    }
    if (j.contains("isdf")) {
      const json& s = j.at("isdf");
      if (s.contains("k_vc")) c.k_vc = s.at("k_vc").get<double>();
      if (s.contains("k_vn")) c.k_vn = s.at("k_vn").get<double>();
      if (s.contains("k_nn")) c.k_nn = s.at("k_nn").get<double>();
      if (s.contains("selector"))
        c.selector = selector_from_string(s.at("selector").get<std::string>());
    }
    if (j.contains("contour")) {
      const json& s = j.at("contour");
      if (s.contains("delta_rel")) c.delta_rel = s.at("delta_rel").get<double>();
      if (s.contains("max_nodes")) c.max_nodes = s.at("max_nodes").get<int>();
    }
    if (j.contains("pipeline"))
      c.pipeline = pipeline_from_string(j.at("pipeline").get<std::string>());
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    if (j.contains("_test_hooks")) {
      const json& h = j.at("_test_hooks");
      if (h.contains("flip_sex_x_sign"))
        c.hook_flip_sex_x = h.at("flip_sex_x_sign").get<bool>();
    }
  } catch (const json::exception& e) {
    throw invalid_input(std::string("config: malformed field: ") + e.what());
  }

  if (!(c.k_vc > 0.0 && c.k_vn > 0.0 && c.k_nn > 0.0))
    throw invalid_input("config: ISDF coefficients must be > 0");
  if (!(c.delta_rel > 0.0 && c.delta_rel < 0.5))
    throw invalid_input("config: delta_rel must lie in (0, 0.5)");
  if (c.max_nodes < 33)
    throw invalid_input("config: max_nodes must allow at least two levels (>= 33)");
  if (c.threads < 1) throw invalid_input("config: threads must be >= 1");
  if (!c.wfn_path.empty() && !std::filesystem::exists(c.wfn_path))
    throw invalid_input("config: wavefunction file does not exist: " +
                        c.wfn_path);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw invalid_input("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw invalid_input(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["system"] = {{"seed", c.seed},     {"dims", c.dims},
                 {"cell", c.cell},     {"nv", c.n_v},
                 {"nc", c.n_c},        {"gap", c.gap},
                 {"bandwidth", c.bandwidth}};
  if (!c.wfn_path.empty()) j["system"]["wfn"] = c.wfn_path;
  j["isdf"] = {{"k_vc", c.k_vc},
               {"k_vn", c.k_vn},
               {"k_nn", c.k_nn},
               {"selector", c.selector == PointSelector::qrcp_direct
                                ? "qrcp_direct"
                                : "qrcp_sketched"}};
  j["contour"] = {{"delta_rel", c.delta_rel}, {"max_nodes", c.max_nodes}};
  j["pipeline"] = to_string(c.pipeline);
  j["threads"] = c.threads;
  return j;
}

inline ElectronicStructure build_system(const RunConfig& c) {
  if (!c.wfn_path.empty()) return load_system(c.wfn_path);
  Grid grid(c.dims, c.cell);
  return build_synthetic_system(c.seed, grid, c.n_v, c.n_c, c.gap,
                                c.bandwidth);
}

// ---------------------------------------------------------------------------
// Stage timing
// ---------------------------------------------------------------------------

class StageTimer {
 public:
  template <typename Fn>
  auto time(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(stage, t0);
      } else {
        auto out = fn();
        record(stage, t0);
        return out;
      }
    } catch (const std::exception& e) {
      throw numeric_error("stage '" + stage + "': " + e.what());
    }
  }

  const std::vector<std::pair<std::string, double>>& entries() const {
    return entries_;
  }

 private:
  void record(const std::string& stage,
              std::chrono::steady_clock::time_point t0) {
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
    entries_.emplace_back(stage, s);
  }
  std::vector<std::pair<std::string, double>> entries_;
};

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunResult {
  PipelineTag pipeline = PipelineTag::lowrank;
  std::vector<double> eps_ks, vxc;
  SelfEnergies sigma;
  QuasiparticleEnergies qp;
  int nodes_used = 0;
  double est_rel_error = 0.0;
  std::vector<std::pair<std::string, double>> timings;
};

namespace detail {

struct IsdfSet {
  IsdfDecomposition vc, vn, nn;
};

inline IsdfSet build_isdf_set(const ElectronicStructure& es,
                              const RunConfig& c) {
  IsdfSet s;
  s.vc = build_isdf(es, PairSetLabel::vc, c.k_vc, c.selector);
  s.vn = build_isdf(es, PairSetLabel::vn, c.k_vn, c.selector);
  s.nn = build_isdf(es, PairSetLabel::nn, c.k_nn, c.selector);
  return s;
}

// T for the low-rank pipeline: elliptic-contour quadrature for gapped
// spectra, direct sum when the contour degenerates.
inline CoupledCoefficients coupled_coefficients_auto(
    const ElectronicStructure& es, const IsdfDecomposition& dec_vc,
    double delta_rel, int max_nodes, int threads) {
  Matrix psi_v = rows_at(es.occupied(), dec_vc.point_indices);
  Matrix psi_c = rows_at(es.unoccupied(), dec_vc.point_indices);
  ContourSpec spec =
      elliptic_params(es.energies, es.n_v, es.n_c, delta_rel, max_nodes);
  if (spec.bypass)
    return coupled_coefficients_direct(psi_v, psi_c, es.energies);
  return coupled_coefficients_contour(psi_v, psi_c, es.energies, spec,
                                      threads);
}

inline void apply_sex_flip_hook(SelfEnergies& sig, const RunConfig& c) {
  if (!c.hook_flip_sex_x) return;
  for (double& v : sig.sigma_sex_x) v = -v;
  sig.finalize(sig.pipeline_tag);
}

}  // namespace detail

inline RunResult run_pipeline(const RunConfig& c) {
  StageTimer timer;
  RunResult out;
  out.pipeline = c.pipeline;

  ElectronicStructure es = timer.time("build", [&] { return build_system(c); });
  CoulombOperator v =
      timer.time("coulomb", [&] {
        return build_coulomb(Grid(es.grid), CoulombMode::reciprocal_diagonal);
      });

  if (c.pipeline == PipelineTag::bruteforce) {
    out.sigma = timer.time("sigma", [&] {
      return self_energies_bruteforce(es, v, c.threads);
    });
  } else if (c.pipeline == PipelineTag::isdf_conventional) {
    detail::IsdfSet dec =
        timer.time("isdf", [&] { return detail::build_isdf_set(es, c); });
    out.sigma = timer.time("sigma", [&] {
      return self_energies_isdf_conventional(es, v, dec.vc, dec.vn, dec.nn,
                                             c.threads);
    });
  } else {
    detail::IsdfSet dec =
        timer.time("isdf", [&] { return detail::build_isdf_set(es, c); });
    CoupledCoefficients t = timer.time("contour", [&] {
      return detail::coupled_coefficients_auto(es, dec.vc, c.delta_rel,
                                               c.max_nodes, c.threads);
    });
    out.nodes_used = t.nodes_used;
    out.est_rel_error = t.est_rel_error;
    EpsilonInverseLowRank e = timer.time("inversion", [&] {
      return build_epsilon_inverse(t.t, dec.vc.p, v, c.threads);
    });
    ScreenedProjections proj = timer.time("projection", [&] {
      return project_screened_interactions(e, dec.vn, dec.nn, c.threads);
    });
    out.sigma = timer.time("sigma", [&] {
      SelfEnergies sig = self_energies_lowrank(es, proj.w_vn, proj.w_nn,
                                               proj.v_vn, dec.vn, dec.nn);
      detail::apply_sex_flip_hook(sig, c);
      return sig;
    });
  }

  out.eps_ks = es.energies;
  out.vxc = es.vxc;
  out.qp = timer.time(
      "qp", [&] { return quasiparticle_energies(es, out.sigma); });
  out.timings = timer.entries();
  return out;
}

inline json run_result_to_json(const RunResult& r, const RunConfig& c) {
  json j;
  j["kind"] = "run";
  j["pipeline"] = to_string(r.pipeline);
  j["nodes_used"] = r.nodes_used;
  j["est_rel_error"] = r.est_rel_error;
  json bands = json::array();
  for (std::size_t n = 0; n < r.eps_ks.size(); ++n) {
    bands.push_back({{"n", n},
                     {"eps_ks", r.eps_ks[n]},
                     {"vxc", r.vxc[n]},
                     {"sigma_sex_x", r.sigma.sigma_sex_x[n]},
                     {"sigma_x", r.sigma.sigma_x[n]},
                     {"sigma_coh", r.sigma.sigma_coh[n]},
                     {"sigma_total", r.sigma.sigma_total[n]},
                     {"eps_gw", r.qp.eps_gw[n]}});
  }
  j["bands"] = std::move(bands);
  json t;
  for (const auto& [name, sec] : r.timings) t[name] = sec;
  j["timings_s"] = std::move(t);
  j["config"] = config_to_json(c);
  return j;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool pass = false;
  double metric = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct NodeSweepRow {
  int n_lambda = 0;
  double est_rel_error = 0.0;  // relative T error against the direct sum
  double sigma_max_dev = 0.0;  // max band |sigma(level) - sigma(direct T)|
};

struct ValidateResult {
  bool pass = true;
  std::vector<CheckResult> checks;
  std::vector<NodeSweepRow> nodes_sweep;
  std::vector<std::pair<double, double>> k_sweep;  // k, mean |dSigma|
  std::vector<double> singular_values;

  void add(CheckResult c) {
    pass = pass && c.pass;
    checks.push_back(std::move(c));
  }
};

namespace detail {

inline double max_abs_dev(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double mean_abs_dev(const std::vector<double>& a,
                           const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double inf_norm_vec(const std::vector<double>& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

// Cross-checks every oracle pair the modules define, on the configured
// system. Guard or precondition violations become failed checks rather than
// crashes.
inline ValidateResult run_validation(const RunConfig& c) {
  ValidateResult out;

  ElectronicStructure es;
  CoulombOperator v;
  try {
    es = build_system(c);
    v = build_coulomb(Grid(es.grid), CoulombMode::reciprocal_diagonal);
  } catch (const std::exception& e) {
    out.add({"system.build", false, 0.0, 0.0, e.what()});
    return out;
  }

  // Orthonormality and Coulomb structure.
  {
    double defect = es.orthonormality_defect();
    out.add({"model.orthonormality", defect <= 1e-10, defect, 1e-10, ""});
  }
  {
    Rng rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    double worst_sym = 0.0, worst_psd = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
      Matrix xy = Matrix::gaussian(es.grid.n_r(), 2, rng);
      Matrix vxy = apply_coulomb(v, xy, c.threads);
      double xvy = 0.0, yvx = 0.0, xvx = 0.0, xx = 0.0;
      for (int i = 0; i < es.grid.n_r(); ++i) {
        xvy += xy(i, 0) * vxy(i, 1);
        yvx += xy(i, 1) * vxy(i, 0);
        xvx += xy(i, 0) * vxy(i, 0);
        xx += xy(i, 0) * xy(i, 0);
      }
      worst_sym = std::max(worst_sym,
                           std::abs(xvy - yvx) / std::max(1.0, std::abs(xvy)));
      worst_psd = std::max(worst_psd, -xvx / xx);
    }
    out.add({"model.coulomb_symmetry", worst_sym <= 1e-10, worst_sym, 1e-10,
             ""});
    out.add({"model.coulomb_psd", worst_psd <= 1e-12, worst_psd, 1e-12, ""});
  }

  detail::IsdfSet dec;
  try {
    dec = detail::build_isdf_set(es, c);
  } catch (const std::exception& e) {
    out.add({"isdf.build", false, 0.0, 0.0, e.what()});
    return out;
  }

  Matrix psi_v = rows_at(es.occupied(), dec.vc.point_indices);
  Matrix psi_c = rows_at(es.unoccupied(), dec.vc.point_indices);
  CoupledCoefficients t_direct =
      coupled_coefficients_direct(psi_v, psi_c, es.energies);

  // Contour vs direct sum, plus the per-level node sweep.
  std::vector<std::pair<int, Matrix>> levels;
  try {
    ContourSpec spec = elliptic_params(es.energies, es.n_v, es.n_c,
                                       c.delta_rel, c.max_nodes);
    if (!spec.bypass) {
      levels = contour_refinement_levels(psi_v, psi_c, es.energies, spec,
                                         c.max_nodes, c.threads);
      CoupledCoefficients quad = coupled_coefficients_contour(
          psi_v, psi_c, es.energies, spec, c.threads);
      double rel = frobenius_norm(quad.t - t_direct.t) /
                   std::max(frobenius_norm(t_direct.t), 1e-300);
      double tol = std::max(c.delta_rel, 1e-9);
      out.add({"contour.direct_equivalence", rel <= tol, rel, tol,
               "nodes_used=" + std::to_string(quad.nodes_used)});
    } else {
      out.add({"contour.direct_equivalence", true, 0.0, 0.0,
               "degenerate spectrum: contour bypassed"});
    }
  } catch (const std::exception& e) {
    out.add({"contour.direct_equivalence", false, 0.0, 0.0, e.what()});
  }

  // Low-rank inverse pieces; everything below needs K.
  EpsilonInverseLowRank einv;
  try {
    einv = build_epsilon_inverse(t_direct.t, dec.vc.p, v, c.threads);
  } catch (const std::exception& e) {
    out.add({"smw.assemble", false, 0.0, 0.0, e.what()});
    return out;
  }

  // SMW vs dense LU of the identical ISDF epsilon.
  try {
    EpsilonDense lu = epsilon_dense_oracle(es, v, &dec.vc, c.threads);
    double rel = frobenius_norm(epsilon_inverse_dense(einv) - lu.eps_inv) /
                 frobenius_norm(lu.eps_inv);
    out.add({"smw.lu_equivalence", rel <= 1e-10, rel, 1e-10, ""});

    Rng rng(c.seed ^ 0xa5a5a5a5ULL);
    Matrix x = Matrix::gaussian(es.grid.n_r(), 1, rng);
    Matrix resid = matmul(lu.eps, epsilon_inverse_apply(einv, x)) - x;
    double rres = frobenius_norm(resid) / frobenius_norm(x);
    out.add({"smw.residual", rres <= 1e-9, rres, 1e-9, ""});
  } catch (const std::exception& e) {
    out.add({"smw.lu_equivalence", false, 0.0, 0.0, e.what()});
  }

  // Pipeline equivalence (the mutation hook applies to the low-rank side).
  SelfEnergies sig_lowrank, sig_conv;
  try {
    ScreenedProjections proj =
        project_screened_interactions(einv, dec.vn, dec.nn, c.threads);
    sig_lowrank = self_energies_lowrank(es, proj.w_vn, proj.w_nn, proj.v_vn,
                                        dec.vn, dec.nn);
    detail::apply_sex_flip_hook(sig_lowrank, c);
    sig_conv = self_energies_isdf_conventional(es, v, dec.vc, dec.vn, dec.nn,
                                               c.threads);
    double scale = std::max(detail::inf_norm_vec(sig_conv.sigma_total), 1e-30);
    double dev =
        detail::max_abs_dev(sig_lowrank.sigma_total, sig_conv.sigma_total) /
        scale;
    out.add({"gw.pipeline_equivalence", dev <= 1e-9, dev, 1e-9, ""});

    double worst_x = 0.0;
    for (double x : sig_lowrank.sigma_x) worst_x = std::max(worst_x, x);
    out.add({"gw.sigma_x_nonpositive", worst_x <= 1e-12, worst_x, 1e-12, ""});
  } catch (const std::exception& e) {
    out.add({"gw.pipeline_equivalence", false, 0.0, 0.0, e.what()});
    return out;
  }

  // Definiteness suite.
  try {
    SymEigResult evt = sym_eig(t_direct.t);
    out.add({"definiteness.T",
             symmetry_defect(t_direct.t) <=
                     1e-10 * frobenius_norm(t_direct.t) &&
                 evt.values.back() < 0.0,
             evt.values.back(), 0.0, "largest eigenvalue"});
    SymEigResult evk = sym_eig(einv.k);
    out.add({"definiteness.K",
             symmetry_defect(einv.k) <= 1e-10 * frobenius_norm(einv.k) &&
                 evk.values.back() < 0.0,
             evk.values.back(), 0.0, "largest eigenvalue"});
    OmegaDiagonal omega = build_omega(es);
    Matrix chi = chi_dense_isdf(es, omega, dec.vc);
    SymEigResult evc = sym_eig(chi);
    double chi_tol = 1e-10 * std::max(1.0, std::abs(evc.values.front()));
    out.add({"definiteness.chi", evc.values.back() <= chi_tol,
             evc.values.back(), chi_tol, "largest eigenvalue"});
    Matrix vd = coulomb_dense_matrix(v);
    SymEigResult evv = sym_eig(vd);
    double v_tol = -1e-12 * std::max(1.0, evv.values.back());
    out.add({"definiteness.V", evv.values.front() >= v_tol,
             evv.values.front(), v_tol, "smallest eigenvalue"});
  } catch (const std::exception& e) {
    out.add({"definiteness.T", false, 0.0, 0.0, e.what()});
  }

  // Brute-force-anchored checks need the exact reference.
  SelfEnergies sig_bf;
  bool have_bf = false;
  try {
    sig_bf = self_energies_bruteforce(es, v, c.threads);
    have_bf = true;
  } catch (const std::exception& e) {
    out.add({"gw.bruteforce_reference", false, 0.0, 0.0, e.what()});
  }

  if (have_bf) {
    // ISDF k-trend: mean |sigma - sigma_exact| non-increasing in k with 5%
    // slack per step, and the vn/nn coefficients dominating the sensitivity.
    try {
      bool monotone = true;
      double prev = 1e300;
      for (double k : {4.0, 6.0, 8.0, 10.0, 12.0}) {
        RunConfig ck = c;
        ck.k_vc = ck.k_vn = ck.k_nn = k;
        detail::IsdfSet dk = detail::build_isdf_set(es, ck);
        SelfEnergies sk = self_energies_isdf_conventional(
            es, v, dk.vc, dk.vn, dk.nn, c.threads);
        double err = detail::mean_abs_dev(sk.sigma_total, sig_bf.sigma_total);
        out.k_sweep.emplace_back(k, err);
        if (err > prev * 1.05) monotone = false;
        prev = err;
      }
      out.add({"isdf.k_trend_monotone", monotone,
               monotone ? 1.0 : 0.0, 1.0, "5% slack per step"});

      RunConfig ca = c;
      ca.k_vc = 6.0;
      ca.k_vn = ca.k_nn = 8.0;
      detail::IsdfSet da = detail::build_isdf_set(es, ca);
      double err_vc = detail::mean_abs_dev(
          self_energies_isdf_conventional(es, v, da.vc, da.vn, da.nn,
                                          c.threads)
              .sigma_total,
          sig_bf.sigma_total);
      RunConfig cb = c;
      cb.k_vc = 8.0;
      cb.k_vn = cb.k_nn = 6.0;
      detail::IsdfSet db = detail::build_isdf_set(es, cb);
      double err_vn = detail::mean_abs_dev(
          self_energies_isdf_conventional(es, v, db.vc, db.vn, db.nn,
                                          c.threads)
              .sigma_total,
          sig_bf.sigma_total);
      out.add({"isdf.sensitivity_order", err_vn > err_vc, err_vn / err_vc,
               1.0, "err(k_vn=k_nn=6) vs err(k_vc=6)"});
    } catch (const std::exception& e) {
      out.add({"isdf.k_trend_monotone", false, 0.0, 0.0, e.what()});
    }

    // Error-bound validity per band.
    try {
      ErrorBoundReport rep =
          isdf_error_bound_check(es, v, dec.vc, dec.vn, dec.nn, c.threads);
      double worst = 0.0;
      for (const BandErrorBound& b : rep.bands)
        worst = std::max(worst, b.observed / std::max(b.bound + b.slack,
                                                      1e-300));
      out.add({"gw.error_bound", rep.all_within, worst, 1.0,
               "max observed/(bound+slack)"});
    } catch (const std::exception& e) {
      out.add({"gw.error_bound", false, 0.0, 0.0, e.what()});
    }

    // Contour-threshold insensitivity plus the per-level node sweep payload.
    try {
      ContourSpec spec = elliptic_params(es.energies, es.n_v, es.n_c,
                                         c.delta_rel, c.max_nodes);
      if (!levels.empty() && !spec.bypass) {
        std::vector<std::vector<double>> sigma_by_level;
        for (const auto& [n_nodes, t_level] : levels) {
          EpsilonInverseLowRank el =
              build_epsilon_inverse(t_level, dec.vc.p, v, c.threads);
          ScreenedProjections pl =
              project_screened_interactions(el, dec.vn, dec.nn, c.threads);
          SelfEnergies sl = self_energies_lowrank(es, pl.w_vn, pl.w_nn,
                                                  pl.v_vn, dec.vn, dec.nn);
          sigma_by_level.push_back(sl.sigma_total);
          NodeSweepRow row;
          row.n_lambda = n_nodes;
          row.est_rel_error = frobenius_norm(t_level - t_direct.t) /
                              std::max(frobenius_norm(t_direct.t), 1e-300);
          row.sigma_max_dev =
              detail::max_abs_dev(sl.sigma_total, sig_lowrank.sigma_total);
          out.nodes_sweep.push_back(row);
        }

        // For each threshold in the sweep, pick the level the adaptive rule
        // would stop at and collect the per-band spread.
        std::vector<int> stop_level;
        for (double delta : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
          int chosen = static_cast<int>(levels.size()) - 1;
          for (std::size_t i = 1; i < levels.size(); ++i) {
            double rel =
                frobenius_norm(levels[i].second - levels[i - 1].second) /
                std::max(frobenius_norm(levels[i].second), 1e-300);
            if (rel <= delta) {
              chosen = static_cast<int>(i);
              break;
            }
          }
          stop_level.push_back(chosen);
        }
        const int nb = es.n_bands();
        double worst_ratio = 0.0;
        bool ok = true;
        for (int n = 0; n < nb; ++n) {
          double lo = 1e300, hi = -1e300;
          for (int lvl : stop_level) {
            lo = std::min(lo, sigma_by_level[lvl][n]);
            hi = std::max(hi, sigma_by_level[lvl][n]);
          }
          double spread = hi - lo;
          double isdf_dev =
              std::abs(sig_conv.sigma_total[n] - sig_bf.sigma_total[n]);
          if (spread > 10.0 * isdf_dev) ok = false;
          worst_ratio =
              std::max(worst_ratio, spread / std::max(10.0 * isdf_dev, 1e-300));
        }
        out.add({"contour.threshold_insensitivity", ok, worst_ratio, 1.0,
                 "max spread/(10 x ISDF deviation)"});
      }
    } catch (const std::exception& e) {
      out.add({"contour.threshold_insensitivity", false, 0.0, 0.0, e.what()});
    }
  }

  // Singular-value payload for reporting.
  try {
    out.singular_values =
        singular_value_report(es.occupied(), es.unoccupied(), 64);
  } catch (const std::exception&) {
    // Reporting payload only; pair matrix may exceed the guard for big runs.
  }

  return out;
}

inline json validate_result_to_json(const ValidateResult& r,
                                    const RunConfig& c) {
  json j;
  j["kind"] = "validate";
  j["pass"] = r.pass;
  json checks = json::array();
  for (const CheckResult& ck : r.checks)
    checks.push_back({{"name", ck.name},
                      {"pass", ck.pass},
                      {"metric", ck.metric},
                      {"threshold", ck.threshold},
                      {"detail", ck.detail}});
  j["checks"] = std::move(checks);
  json nodes = json::array();
  for (const NodeSweepRow& row : r.nodes_sweep)
    nodes.push_back({{"n_lambda", row.n_lambda},
                     {"est_rel_error", row.est_rel_error},
                     {"sigma_max_dev", row.sigma_max_dev}});
  json ks = json::array();
  for (const auto& [k, err] : r.k_sweep)
    ks.push_back({{"k", k}, {"mean_abs_err", err}});
  j["sweeps"] = {{"nodes", std::move(nodes)},
                 {"k", std::move(ks)},
                 {"singular_values", r.singular_values}};
  j["config"] = config_to_json(c);
  return j;
}

// ---------------------------------------------------------------------------
// scale
// ---------------------------------------------------------------------------

struct ScaleRow {
  int n_e = 0, n_r = 0, n_mu = 0;
  double t_contour = 0.0, t_inversion = 0.0, t_projection = 0.0;
  double t_lowrank = 0.0, t_dense = 0.0;
  bool dense_skipped = false;
};

struct ScaleResult {
  std::vector<ScaleRow> rows;
  double slope_lowrank = 0.0;
  double slope_dense = 0.0;
  int dense_points = 0;
};

namespace detail {

// Three near-equal power-of-two factors of the next power of two >= n.
inline std::array<int, 3> dims_for_points(int n) {
  int k = 0;
  while ((1 << k) < n) ++k;
  std::array<int, 3> d;
  d[0] = 1 << ((k + 2) / 3);
  d[1] = 1 << ((k + 1) / 3);
  d[2] = 1 << (k / 3);
  return d;
}

inline double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

inline double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(pts.size());
  for (const auto& [x, y] : pts) {
    double lx = std::log(x), ly = std::log(std::max(y, 1e-12));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

// Times the low-rank inversion stages (contour T, K assembly, screened
// projections) and the dense-LU oracle across system sizes; each stage is the
// median of three repeats. ISDF setup is excluded from the timings.
inline ScaleResult run_scale(const RunConfig& c, const std::vector<int>& sizes) {
  if (sizes.empty()) throw invalid_input("scale: size list is empty");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw invalid_input("scale: sizes must be strictly ascending");

  ScaleResult out;
  for (int n_e : sizes) {
    if (n_e < 2) throw invalid_input("scale: N_e must be >= 2");
    const int n_v = std::max(1, n_e / 2);
    const int n_c = n_v;
    std::array<int, 3> dims = detail::dims_for_points(16 * n_e);
    std::array<double, 3> cell = {0.75 * dims[0], 0.75 * dims[1],
                                  0.75 * dims[2]};
    Grid grid(dims, cell);
    ElectronicStructure es =
        build_synthetic_system(c.seed, grid, n_v, n_c, c.gap, c.bandwidth);
    CoulombOperator v = build_coulomb(grid, CoulombMode::reciprocal_diagonal);

    // Full row rank of C requires N_mu <= N_v N_c.
    double k_eff = std::min(
        c.k_vc, std::sqrt(static_cast<double>(n_v) * n_c));
    IsdfDecomposition dec_vc = build_isdf(es, PairSetLabel::vc, k_eff,
                                          c.selector);
    Matrix psi_v = rows_at(es.occupied(), dec_vc.point_indices);
    Matrix psi_c = rows_at(es.unoccupied(), dec_vc.point_indices);
    ContourSpec spec = elliptic_params(es.energies, n_v, n_c, c.delta_rel,
                                       c.max_nodes);

    ScaleRow row;
    row.n_e = n_e;
    row.n_r = grid.n_r();
    row.n_mu = dec_vc.n_mu;

    auto timed = [&](auto&& fn) {
      double t[3];
      for (int rep = 0; rep < 3; ++rep) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        t[rep] = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
      }
      return detail::median3(t[0], t[1], t[2]);
    };

    CoupledCoefficients t_mat;
    row.t_contour = timed([&] {
      t_mat = spec.bypass
                  ? coupled_coefficients_direct(psi_v, psi_c, es.energies)
                  : coupled_coefficients_contour(psi_v, psi_c, es.energies,
                                                 spec, c.threads);
    });
    EpsilonInverseLowRank einv;
    row.t_inversion = timed(
        [&] { einv = build_epsilon_inverse(t_mat.t, dec_vc.p, v, c.threads); });
    row.t_projection = timed([&] {
      // Screened projections through the vc point set; the vn/nn projections
      // have identical shape and cost profile at N_mu = k sqrt(N1 N2).
      project_screened_interactions(einv, dec_vc, dec_vc, c.threads);
    });
    row.t_lowrank = row.t_contour + row.t_inversion + row.t_projection;

    if (grid.n_r() <= kDenseEpsilonGuard) {
      row.t_dense =
          timed([&] { epsilon_dense_oracle(es, v, &dec_vc, c.threads); });
    } else {
      row.dense_skipped = true;
    }
    out.rows.push_back(row);
  }

  std::vector<std::pair<double, double>> lr_pts, dense_pts;
  for (const ScaleRow& r : out.rows) {
    lr_pts.emplace_back(r.n_e, r.t_lowrank);
    if (!r.dense_skipped) dense_pts.emplace_back(r.n_e, r.t_dense);
  }
  out.slope_lowrank =
      lr_pts.size() >= 2 ? detail::loglog_slope(lr_pts) : 0.0;
  out.dense_points = static_cast<int>(dense_pts.size());
  out.slope_dense =
      dense_pts.size() >= 2 ? detail::loglog_slope(dense_pts) : 0.0;
  return out;
}

inline json scale_result_to_json(const ScaleResult& r, const RunConfig& c) {
  json j;
  j["kind"] = "scale";
  json rows = json::array();
  for (const ScaleRow& row : r.rows)
    rows.push_back({{"n_e", row.n_e},
                    {"n_r", row.n_r},
                    {"n_mu", row.n_mu},
                    {"t_contour_s", row.t_contour},
                    {"t_inversion_s", row.t_inversion},
                    {"t_projection_s", row.t_projection},
                    {"t_lowrank_s", row.t_lowrank},
                    {"t_dense_s", row.t_dense},
                    {"dense_skipped", row.dense_skipped}});
  j["rows"] = std::move(rows);
  j["slopes"] = {{"lowrank", r.slope_lowrank},
                 {"dense", r.slope_dense},
                 {"dense_points", r.dense_points}};
  j["config"] = config_to_json(c);
  return j;
}

// ---------------------------------------------------------------------------
// report: tidy per-plot CSVs from result JSON files
// ---------------------------------------------------------------------------

namespace detail {

inline void write_csv(const std::filesystem::path& path,
                      const std::string& header,
                      const std::vector<std::string>& rows) {
  std::ofstream os(path);
  if (!os) throw io_error("report: cannot write " + path.string());
  os << header << "\n";
  for (const std::string& r : rows) os << r << "\n";
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Emits plot-ready CSVs for a result file produced by run/validate/scale.
// Returns the list of files written.
inline std::vector<std::string> write_report(const json& result,
                                             const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  if (!result.contains("kind") || !result["kind"].is_string())
    throw io_error("report: schema mismatch: missing 'kind'");
  const std::string kind = result["kind"];

  try {
    if (kind == "run") {
      std::vector<std::string> rows;
      for (const json& b : result.at("bands"))
        rows.push_back(std::to_string(b.at("n").get<int>()) + "," +
                       detail::fmt(b.at("eps_ks").get<double>()) + "," +
                       detail::fmt(b.at("sigma_sex_x").get<double>()) + "," +
                       detail::fmt(b.at("sigma_x").get<double>()) + "," +
                       detail::fmt(b.at("sigma_coh").get<double>()) + "," +
                       detail::fmt(b.at("sigma_total").get<double>()) + "," +
                       detail::fmt(b.at("eps_gw").get<double>()));
      fs::path p = fs::path(out_dir) / "bands.csv";
      detail::write_csv(p, "n,eps_ks,sigma_sex_x,sigma_x,sigma_coh,sigma_total,eps_gw",
                        rows);
      written.push_back(p.string());
    } else if (kind == "validate") {
      std::vector<std::string> rows;
      for (const json& ck : result.at("checks"))
        rows.push_back(ck.at("name").get<std::string>() + "," +
                       (ck.at("pass").get<bool>() ? "1" : "0") + "," +
                       detail::fmt(ck.at("metric").get<double>()) + "," +
                       detail::fmt(ck.at("threshold").get<double>()));
      fs::path p = fs::path(out_dir) / "checks.csv";
      detail::write_csv(p, "name,pass,metric,threshold", rows);
      written.push_back(p.string());

      const json& sweeps = result.at("sweeps");
      rows.clear();
      for (const json& n : sweeps.at("nodes"))
        rows.push_back(std::to_string(n.at("n_lambda").get<int>()) + "," +
                       detail::fmt(n.at("est_rel_error").get<double>()) + "," +
                       detail::fmt(n.at("sigma_max_dev").get<double>()));
      p = fs::path(out_dir) / "nodes_sweep.csv";
      detail::write_csv(p, "n_lambda,est_rel_error,sigma_max_dev", rows);
      written.push_back(p.string());

      rows.clear();
      for (const json& n : sweeps.at("k"))
        rows.push_back(detail::fmt(n.at("k").get<double>()) + "," +
                       detail::fmt(n.at("mean_abs_err").get<double>()));
      p = fs::path(out_dir) / "k_sweep.csv";
      detail::write_csv(p, "k,mean_abs_err", rows);
      written.push_back(p.string());

      rows.clear();
      int idx = 0;
      for (const json& s : sweeps.at("singular_values"))
        rows.push_back(std::to_string(idx++) + "," +
                       detail::fmt(s.get<double>()));
      p = fs::path(out_dir) / "singular_values.csv";
      detail::write_csv(p, "index,sigma", rows);
      written.push_back(p.string());
    } else if (kind == "scale") {
      std::vector<std::string> rows;
      for (const json& r : result.at("rows"))
        rows.push_back(std::to_string(r.at("n_e").get<int>()) + "," +
                       std::to_string(r.at("n_r").get<int>()) + "," +
                       std::to_string(r.at("n_mu").get<int>()) + "," +
                       detail::fmt(r.at("t_contour_s").get<double>()) + "," +
                       detail::fmt(r.at("t_inversion_s").get<double>()) + "," +
                       detail::fmt(r.at("t_projection_s").get<double>()) + "," +
                       detail::fmt(r.at("t_lowrank_s").get<double>()) + "," +
                       detail::fmt(r.at("t_dense_s").get<double>()) + "," +
                       (r.at("dense_skipped").get<bool>() ? "1" : "0"));
      fs::path p = fs::path(out_dir) / "scale.csv";
      detail::write_csv(
          p, "n_e,n_r,n_mu,t_contour_s,t_inversion_s,t_projection_s,t_lowrank_s,t_dense_s,dense_skipped",
          rows);
      written.push_back(p.string());

      rows.clear();
      const json& slopes = result.at("slopes");
      rows.push_back("lowrank," +
                     detail::fmt(slopes.at("lowrank").get<double>()));
      rows.push_back("dense," + detail::fmt(slopes.at("dense").get<double>()));
      p = fs::path(out_dir) / "scale_slopes.csv";
      detail::write_csv(p, "stage,fitted_exponent", rows);
      written.push_back(p.string());
    } else {
      throw io_error("report: schema mismatch: unknown kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw io_error(std::string("report: schema mismatch: ") + e.what());
  }
  return written;
}

inline json load_result_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("report: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw io_error(std::string("report: invalid JSON in ") + path + ": " +
                   e.what());
  }
  return j;
}

inline void write_json_file(const json& j, const std::string& path) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path().empty()
          ? "."
          : std::filesystem::path(path).parent_path().string());
  std::ofstream os(path);
  if (!os) throw io_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

}  // namespace lrgw
