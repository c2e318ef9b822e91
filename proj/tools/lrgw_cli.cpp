// lrgw: low-rank dielectric-matrix inversion and static-COHSEX G0W0 on
// synthetic periodic systems.
//
// Subcommands:
//   run       execute one pipeline, write run_result.json + bands.csv
//   validate  run every oracle cross-check, write validate_result.json
//   scale     time the inversion stages across system sizes
//   report    turn result JSON files into plot-ready CSVs
//
// Exit codes: 0 success, 1 validation/stage failure, 2 config or usage error.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrgw/driver.hpp"

namespace {

lrgw::RunConfig make_config(const std::string& config_path,
                            const std::string& out_dir, int threads) {
  lrgw::RunConfig cfg;
  if (!config_path.empty()) cfg = lrgw::load_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (threads > 0) cfg.threads = threads;
  return cfg;
}

int cmd_run(const lrgw::RunConfig& cfg) {
  lrgw::RunResult result = lrgw::run_pipeline(cfg);
  lrgw::json j = lrgw::run_result_to_json(result, cfg);
  std::filesystem::create_directories(cfg.out_dir);
  std::string path =
      (std::filesystem::path(cfg.out_dir) / "run_result.json").string();
  lrgw::write_json_file(j, path);
  lrgw::write_report(j, cfg.out_dir);
  std::printf("run: pipeline=%s bands=%zu nodes=%d -> %s\n",
              lrgw::to_string(result.pipeline), result.eps_ks.size(),
              result.nodes_used, path.c_str());
  return 0;
}

int cmd_validate(const lrgw::RunConfig& cfg) {
  lrgw::ValidateResult result = lrgw::run_validation(cfg);
  lrgw::json j = lrgw::validate_result_to_json(result, cfg);
  std::filesystem::create_directories(cfg.out_dir);
  std::string path =
      (std::filesystem::path(cfg.out_dir) / "validate_result.json").string();
  lrgw::write_json_file(j, path);
  for (const lrgw::CheckResult& c : result.checks)
    std::printf("%-36s %s  metric=%.3e threshold=%.3e %s\n", c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.metric, c.threshold,
                c.detail.c_str());
  std::printf("validate: %s -> %s\n", result.pass ? "PASS" : "FAIL",
              path.c_str());
  return result.pass ? 0 : 1;
}

int cmd_scale(const lrgw::RunConfig& cfg, const std::vector<int>& sizes) {
  lrgw::ScaleResult result = lrgw::run_scale(cfg, sizes);
  lrgw::json j = lrgw::scale_result_to_json(result, cfg);
  std::filesystem::create_directories(cfg.out_dir);
  std::string path =
      (std::filesystem::path(cfg.out_dir) / "scale_result.json").string();
  lrgw::write_json_file(j, path);
  lrgw::write_report(j, cfg.out_dir);
  for (const lrgw::ScaleRow& r : result.rows)
    std::printf(
        "N_e=%4d N_r=%5d N_mu=%4d  lowrank=%.4fs (contour %.4f + inversion "
        "%.4f + projection %.4f)  dense=%s\n",
        r.n_e, r.n_r, r.n_mu, r.t_lowrank, r.t_contour, r.t_inversion,
        r.t_projection,
        r.dense_skipped ? "skipped" : (std::to_string(r.t_dense) + "s").c_str());
  std::printf("fitted exponents: lowrank=%.2f dense=%.2f -> %s\n",
              result.slope_lowrank, result.slope_dense, path.c_str());
  return 0;
}

int cmd_report(const std::vector<std::string>& files,
               const std::string& out_dir) {
  for (const std::string& f : files) {
    lrgw::json j = lrgw::load_result_json(f);
    std::vector<std::string> written = lrgw::write_report(j, out_dir);
    for (const std::string& w : written)
      std::printf("report: %s -> %s\n", f.c_str(), w.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank dielectric inversion + static COHSEX G0W0"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 0;
  std::vector<int> sizes;
  std::vector<std::string> report_files;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads for stage internals");
  };

  CLI::App* run = app.add_subcommand("run", "execute one pipeline");
  add_common(run);
  CLI::App* validate =
      app.add_subcommand("validate", "run all oracle cross-checks");
  add_common(validate);
  CLI::App* scale =
      app.add_subcommand("scale", "time inversion stages across sizes");
  add_common(scale);
  scale->add_option("--sizes", sizes, "ascending electron counts N_e")
      ->delimiter(',');
  CLI::App* report =
      app.add_subcommand("report", "emit plot-ready CSVs from result JSON");
  report->add_option("files", report_files, "result JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  lrgw::RunConfig cfg;
  try {
    if (!report->parsed()) cfg = make_config(config_path, out_dir, threads);
    if (scale->parsed()) {
      if (sizes.empty())
        throw lrgw::invalid_input("scale: --sizes must list at least one N_e");
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 2)
          throw lrgw::invalid_input("scale: every N_e must be >= 2");
        if (i > 0 && sizes[i] <= sizes[i - 1])
          throw lrgw::invalid_input("scale: sizes must be strictly ascending");
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(cfg);
    if (validate->parsed()) return cmd_validate(cfg);
    if (scale->parsed()) return cmd_scale(cfg, sizes);
    if (report->parsed())
      return cmd_report(report_files, out_dir.empty() ? "." : out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
