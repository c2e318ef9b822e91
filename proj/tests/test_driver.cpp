#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lrgw/driver.hpp"

using namespace lrgw;
namespace fs = std::filesystem;

namespace {

json small_config_json() {
  return json{{"system",
               {{"seed", 1},
                {"dims", {8, 8, 4}},
                {"cell", {6.0, 6.0, 3.0}},
                {"nv", 8},
                {"nc", 8},
                {"gap", 1.0},
                {"bandwidth", 4.0}}},
              {"isdf", {{"k_vc", 4.0}, {"k_vn", 4.0}, {"k_nn", 4.0}}}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("lrgw_drv_" + name)) {
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

#ifdef LRGW_CLI_PATH
int run_cli(const std::string& args) {
  std::string cmd = std::string(LRGW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}
#endif

}  // namespace

TEST_CASE("config defaults match the documented values") {
  RunConfig c = parse_config(json::object());
  CHECK(c.k_vc == 8.0);
  CHECK(c.k_vn == 8.0);
  CHECK(c.k_nn == 8.0);
  CHECK(c.delta_rel == 1e-7);
  CHECK(c.max_nodes == 1025);
  CHECK(c.pipeline == PipelineTag::lowrank);
  CHECK(c.threads == 1);
  CHECK(c.dims == std::array<int, 3>{8, 8, 8});
  CHECK(c.n_v == 16);
  CHECK(c.n_c == 16);
}

TEST_CASE("config invariants are enforced") {
  CHECK_THROWS_AS(parse_config(json{{"isdf", {{"k_vc", 0.0}}}}), invalid_input);
  CHECK_THROWS_AS(parse_config(json{{"contour", {{"delta_rel", 0.6}}}}),
                  invalid_input);
  CHECK_THROWS_AS(parse_config(json{{"contour", {{"delta_rel", 0.0}}}}),
                  invalid_input);
  CHECK_THROWS_AS(parse_config(json{{"contour", {{"max_nodes", 17}}}}),
                  invalid_input);
  CHECK_THROWS_AS(parse_config(json{{"threads", 0}}), invalid_input);
  CHECK_THROWS_AS(parse_config(json{{"pipeline", "unknown"}}), invalid_input);
  CHECK_THROWS_AS(
      parse_config(json{{"system", {{"wfn", "no_such_file.wfn1"}}}}),
      invalid_input);
  CHECK_THROWS_AS(parse_config(json{{"isdf", {{"selector", "kmeans"}}}}),
                  invalid_input);
}

TEST_CASE("run produces a full band table and is deterministic") {
  RunConfig c = parse_config(small_config_json());
  RunResult r1 = run_pipeline(c);
  CHECK(r1.eps_ks.size() == 16);
  CHECK(r1.qp.eps_gw.size() == 16);
  CHECK(r1.nodes_used >= 17);
  for (int n = 0; n < 16; ++n)
    CHECK(r1.qp.eps_gw[n] ==
          doctest::Approx(r1.eps_ks[n] + r1.sigma.sigma_total[n] - r1.vxc[n]));

  RunResult r2 = run_pipeline(c);
  json j1 = run_result_to_json(r1, c);
  json j2 = run_result_to_json(r2, c);
  j1.erase("timings_s");
  j2.erase("timings_s");
  CHECK(j1 == j2);
}

TEST_CASE("pipelines share the result schema and differ in the tag") {
  RunConfig c = parse_config(small_config_json());
  c.pipeline = PipelineTag::bruteforce;
  RunResult rb = run_pipeline(c);
  c.pipeline = PipelineTag::isdf_conventional;
  RunResult rc_ = run_pipeline(c);
  json jb = run_result_to_json(rb, c);
  json jc = run_result_to_json(rc_, c);
  CHECK(jb["pipeline"] == "bruteforce");
  CHECK(jc["pipeline"] == "isdf_conventional");
  CHECK(jb["bands"].size() == jc["bands"].size());
  for (auto& [key, val] : jb["bands"][0].items())
    CHECK(jc["bands"][0].contains(key));
  CHECK(jb["nodes_used"] == 0);
}

TEST_CASE("run on a wavefunction file round trips through WFN1") {
  TempDir dir("wfn");
  Grid grid({4, 4, 4}, {6.0, 6.0, 6.0});
  ElectronicStructure es = build_synthetic_system(5, grid, 4, 4, 1.0, 2.0);
  std::string wfn = (dir.path / "system.wfn1").string();
  save_system(wfn, es);

  json j = json{{"system", {{"wfn", wfn}}},
                {"isdf", {{"k_vc", 2.0}, {"k_vn", 2.0}, {"k_nn", 2.0}}},
                {"pipeline", "isdf_conventional"}};
  RunConfig c = parse_config(j);
  RunResult r = run_pipeline(c);
  CHECK(r.eps_ks == es.energies);
}

TEST_CASE("validation passes on a small sane config") {
  RunConfig c = parse_config(small_config_json());
  ValidateResult v = run_validation(c);
  for (const CheckResult& ck : v.checks) {
    INFO(ck.name, " metric=", ck.metric, " detail=", ck.detail);
    CHECK(ck.pass);
  }
  CHECK(v.pass);
  CHECK(v.k_sweep.size() == 5);
  CHECK_FALSE(v.nodes_sweep.empty());
  CHECK_FALSE(v.singular_values.empty());
}

TEST_CASE("sign-flip mutation is caught by the pipeline-equivalence check") {
  json j = small_config_json();
  j["_test_hooks"] = {{"flip_sex_x_sign", true}};
  RunConfig c = parse_config(j);
  ValidateResult v = run_validation(c);
  CHECK_FALSE(v.pass);
  bool found = false;
  for (const CheckResult& ck : v.checks)
    if (ck.name == "gw.pipeline_equivalence") {
      found = true;
      CHECK_FALSE(ck.pass);
    }
  CHECK(found);
}

TEST_CASE("gapless system yields a structured failure, not a crash") {
  json j = small_config_json();
  j["system"]["gap"] = 0.0;
  RunConfig c = parse_config(j);
  ValidateResult v = run_validation(c);
  CHECK_FALSE(v.pass);
  REQUIRE_FALSE(v.checks.empty());
  CHECK(v.checks.front().name == "system.build");
  CHECK_FALSE(v.checks.front().detail.empty());
}

TEST_CASE("scale rejects bad size lists and reports one row per size") {
  RunConfig c = parse_config(small_config_json());
  CHECK_THROWS_AS(run_scale(c, {}), invalid_input);
  CHECK_THROWS_AS(run_scale(c, {8, 8}), invalid_input);
  CHECK_THROWS_AS(run_scale(c, {16, 8}), invalid_input);

  ScaleResult s = run_scale(c, {4, 8});
  CHECK(s.rows.size() == 2);
  CHECK(s.rows[0].n_e == 4);
  CHECK(s.rows[1].n_e == 8);
  for (const ScaleRow& r : s.rows) {
    CHECK(r.t_lowrank > 0.0);
    CHECK_FALSE(r.dense_skipped);
    CHECK(r.t_dense > 0.0);
  }
}

TEST_CASE("report emits the documented CSVs") {
  TempDir dir("report");
  RunConfig c = parse_config(small_config_json());

  SUBCASE("run result") {
    RunResult r = run_pipeline(c);
    json j = run_result_to_json(r, c);
    std::vector<std::string> files = write_report(j, dir.path.string());
    REQUIRE(files.size() == 1);
    std::ifstream is(files[0]);
    std::string header;
    std::getline(is, header);
    CHECK(header == "n,eps_ks,sigma_sex_x,sigma_x,sigma_coh,sigma_total,eps_gw");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 16);
  }

  SUBCASE("validate result with monotone singular values") {
    ValidateResult v = run_validation(c);
    json j = validate_result_to_json(v, c);
    write_report(j, dir.path.string());
    std::ifstream is(dir.path / "singular_values.csv");
    std::string line;
    std::getline(is, line);
    double prev = 1e300;
    int rows = 0;
    while (std::getline(is, line)) {
      double v2 = std::strtod(line.substr(line.find(',') + 1).c_str(), nullptr);
      CHECK(v2 <= prev + 1e-12);
      prev = v2;
      ++rows;
    }
    CHECK(rows > 0);

    std::ifstream ks(dir.path / "k_sweep.csv");
    std::getline(ks, line);
    rows = 0;
    while (std::getline(ks, line)) ++rows;
    CHECK(rows == 5);
  }

  SUBCASE("schema mismatch is rejected") {
    CHECK_THROWS_AS(write_report(json{{"kind", "mystery"}}, dir.path.string()),
                    io_error);
    CHECK_THROWS_AS(write_report(json{{"bands", json::array()}},
                                 dir.path.string()),
                    io_error);
    json bad = {{"kind", "run"}};  // missing bands
    CHECK_THROWS_AS(write_report(bad, dir.path.string()), io_error);
  }
}

#ifdef LRGW_CLI_PATH
TEST_CASE("cli exit codes follow the 0/1/2 contract") {
  TempDir dir("cli");
  std::string out = " --out " + (dir.path / "o").string();

  std::string cfg_path = (dir.path / "small.json").string();
  {
    std::ofstream os(cfg_path);
    os << small_config_json().dump();
  }
  CHECK(run_cli("run --config " + cfg_path + out) == 0);
  CHECK(run_cli("validate --config " + cfg_path + out) == 0);
  CHECK(fs::exists(dir.path / "o" / "run_result.json"));
  CHECK(fs::exists(dir.path / "o" / "validate_result.json"));
  CHECK(run_cli("report " + (dir.path / "o" / "run_result.json").string() +
                out) == 0);

  // config errors -> 2
  CHECK(run_cli("run --config no_such_config.json") == 2);
  std::string bad_path = (dir.path / "bad.json").string();
  {
    std::ofstream os(bad_path);
    os << R"({"contour":{"delta_rel":0.9}})";
  }
  CHECK(run_cli("run --config " + bad_path) == 2);
  CHECK(run_cli("scale" + out) == 2);     // missing sizes
  CHECK(run_cli("bogus-subcommand") == 2);

  // validation failure -> 1
  std::string flip_path = (dir.path / "flip.json").string();
  {
    json j = small_config_json();
    j["_test_hooks"] = {{"flip_sex_x_sign", true}};
    std::ofstream os(flip_path);
    os << j.dump();
  }
  CHECK(run_cli("validate --config " + flip_path + out) == 1);
}
#endif

TEST_CASE("default config runs the full si8-shaped pipeline") {
  RunConfig c = parse_config(json::object());
  RunResult r = run_pipeline(c);
  json j = run_result_to_json(r, c);
  CHECK(j["bands"].size() == 32);
  CHECK(j["pipeline"] == "lowrank");
  CHECK(r.nodes_used >= 17);
  CHECK(r.nodes_used <= 1025);
  CHECK(r.est_rel_error <= c.delta_rel);
}
