#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "spdshrink/distributions.hpp"
#include "spdshrink/geometry.hpp"
#include "spdshrink/io.hpp"
#include "spdshrink/rng.hpp"

// End-to-end tests driving the installed binary.  SPDSHRINK_CLI_PATH is
// injected by the build system and points at the freshly built executable.

namespace {

using namespace spdshrink;
namespace fs = std::filesystem;

std::string cli() { return SPDSHRINK_CLI_PATH; }

int exit_code(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>/dev/null").c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spdshrink_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text) lines += (c == '\n');
  return lines;
}

std::map<std::string, std::string> read_kv_csv(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::map<std::string, std::string> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    out[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return out;
}

// p sites of n observations around a site-specific center.
TensorField make_group(int p, int n, std::uint64_t seed, bool shift_block) {
  RngStream rng(seed, 0);
  Matrix base = Matrix::Identity(2, 2);
  Matrix shifted(2, 2);
  shifted << 2.0, 0.3, 0.3, 0.6;
  Matrix cov = 0.15 * Matrix::Identity(3, 3);
  TensorField field;
  field.N = 2;
  field.n = n;
  field.sites.resize(p);
  for (int i = 0; i < p; ++i) {
    const bool shifted_site = shift_block && i < p / 4;
    field.sites[i] =
        sample_log_normal({shifted_site ? shifted : base, cov}, rng, n);
  }
  return field;
}

TensorField make_estimate_fixture(int p, int n, std::uint64_t seed) {
  RngStream rng(seed, 1);
  Matrix cov = 0.2 * Matrix::Identity(3, 3);
  TensorField field;
  field.N = 2;
  field.n = n;
  field.sites.resize(p);
  for (int i = 0; i < p; ++i) {
    // Site centers spread around the identity.
    Matrix g(2, 2);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) g(r, c) = 0.3 * rng.normal();
    }
    const Matrix center = sym_exp(symmetrize(g));
    field.sites[i] = sample_log_normal({center, cov}, rng, n);
  }
  return field;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("bad invocations exit with code 2") {
  TempDir dir;
  CHECK(exit_code(cli()) == 2);  // missing subcommand
  CHECK(exit_code(cli() + " estimate --input " + dir.file("absent.spdf") +
                  " --output " + dir.file("out")) == 2);
  CHECK(exit_code(cli() + " estimate") == 2);  // missing required options
  CHECK(exit_code(cli() + " no-such-command") == 2);
  CHECK(exit_code(cli() + " simulate-risk --config " +
                  dir.file("absent.cfg")) == 2);
}

TEST_CASE("estimate writes shrinkage outputs and improves on its start") {
  TempDir dir;
  const std::string input = dir.file("field.spdf");
  write_tensor_field(input, make_estimate_fixture(30, 8, 2001));
  const std::string out = dir.file("fit");

  const int rc = exit_code(cli() + " estimate --input " + input +
                           " --output " + out);
  CHECK((rc == 0 || rc == 3));
  for (const char* name : {"means.spdf", "covs.spdf", "prior_mean.spdf",
                           "prior_scale.spdf", "hyperparams.csv"}) {
    CHECK(fs::exists(fs::path(out) / name));
  }
  const TensorField means = read_tensor_field(out + "/means.spdf");
  CHECK(means.p() == 30);
  CHECK(means.n == 1);
  CHECK(means.N == 2);
  const TensorField scale = read_tensor_field(out + "/prior_scale.spdf");
  CHECK(scale.N == 3);  // q x q

  const auto summary = read_kv_csv(out + "/hyperparams.csv");
  CHECK(summary.at("mode") == "full");
  CHECK(summary.count("lambda") == 1);
  CHECK(summary.count("nu") == 1);
  const double sure_init = std::stod(summary.at("sure_init"));
  const double sure_final = std::stod(summary.at("sure_final"));
  CHECK(sure_final <= sure_init + 1e-9);
}

TEST_CASE("estimate honors the known-variance flag") {
  TempDir dir;
  const std::string input = dir.file("field.spdf");
  write_tensor_field(input, make_estimate_fixture(25, 6, 2002));
  const std::string out = dir.file("fit_kv");
  const int rc = exit_code(cli() + " estimate --known-variance --input " +
                           input + " --output " + out);
  CHECK((rc == 0 || rc == 3));
  CHECK(fs::exists(fs::path(out) / "means.spdf"));
  CHECK(fs::exists(fs::path(out) / "prior_mean.spdf"));
  CHECK_FALSE(fs::exists(fs::path(out) / "covs.spdf"));
  CHECK_FALSE(fs::exists(fs::path(out) / "prior_scale.spdf"));
  const auto summary = read_kv_csv(out + "/hyperparams.csv");
  CHECK(summary.at("mode") == "known-variance");
  CHECK(std::stod(summary.at("lambda")) > 0.0);
}

TEST_CASE("estimate validates its config file") {
  TempDir dir;
  const std::string input = dir.file("field.spdf");
  write_tensor_field(input, make_estimate_fixture(20, 6, 2003));

  const std::string good_cfg = dir.file("good.cfg");
  write_text(good_cfg, "max_iters = 150\ngrad_tol = 1e-5\n");
  const int rc = exit_code(cli() + " estimate --input " + input +
                           " --output " + dir.file("a") + " --config " +
                           good_cfg);
  CHECK((rc == 0 || rc == 3));

  const std::string bad_cfg = dir.file("bad.cfg");
  write_text(bad_cfg, "max_iters = 150\nmystery_knob = 7\n");
  CHECK(exit_code(cli() + " estimate --input " + input + " --output " +
                  dir.file("b") + " --config " + bad_cfg) == 2);
}

TEST_CASE("groupdiff produces per-site results and an optional smoothed map") {
  TempDir dir;
  const std::string g1 = dir.file("g1.spdf");
  const std::string g2 = dir.file("g2.spdf");
  write_tensor_field(g1, make_group(64, 6, 3001, false));
  write_tensor_field(g2, make_group(64, 6, 3002, true));
  const std::string out = dir.file("diff");

  const std::string cfg = dir.file("grid.cfg");
  write_text(cfg, "grid_rows = 8\ngrid_cols = 8\n");
  const int rc = exit_code(cli() + " groupdiff --group1 " + g1 + " --group2 " +
                           g2 + " --output " + out + " --smooth 1" +
                           " --top-fraction 0.25 --config " + cfg);
  CHECK((rc == 0 || rc == 3));

  const std::string sites = slurp(out + "/sites.csv");
  CHECK(count_lines(sites) == 65);  // header + 64 sites
  CHECK(sites.find("site,t2,z,lambda_mom,lambda_tweedie,selected,"
                   "mom_fallback") == 0);

  const auto summary = read_kv_csv(out + "/summary.csv");
  CHECK(summary.at("p") == "64");
  CHECK(std::stoi(summary.at("n_selected")) == 16);  // 0.25 * 64

  // window 1: smoothed equals raw, column for column.
  std::ifstream smooth(out + "/smoothed.csv");
  REQUIRE(smooth.good());
  std::string line;
  std::getline(smooth, line);  // header
  int rows = 0;
  while (std::getline(smooth, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    REQUIRE(cells.size() == 4);
    CHECK(cells[2] == cells[3]);
    ++rows;
  }
  CHECK(rows == 64);
}

TEST_CASE("groupdiff rejects insufficient degrees of freedom") {
  TempDir dir;
  const std::string g1 = dir.file("g1.spdf");
  const std::string g2 = dir.file("g2.spdf");
  // n1 + n2 - 2 = 4 <= q + 1 = 4 for 2x2 matrices.
  write_tensor_field(g1, make_group(60, 3, 3003, false));
  write_tensor_field(g2, make_group(60, 3, 3004, false));
  CHECK(exit_code(cli() + " groupdiff --group1 " + g1 + " --group2 " + g2 +
                  " --output " + dir.file("diff")) == 2);
}

TEST_CASE("groupdiff rejects an even smoothing window and bad grids") {
  TempDir dir;
  const std::string g1 = dir.file("g1.spdf");
  const std::string g2 = dir.file("g2.spdf");
  write_tensor_field(g1, make_group(64, 6, 3005, false));
  write_tensor_field(g2, make_group(64, 6, 3006, false));
  CHECK(exit_code(cli() + " groupdiff --group1 " + g1 + " --group2 " + g2 +
                  " --output " + dir.file("a") + " --smooth 2") == 2);
  const std::string cfg = dir.file("grid.cfg");
  write_text(cfg, "grid_rows = 5\ngrid_cols = 5\n");  // 25 != 64
  CHECK(exit_code(cli() + " groupdiff --group1 " + g1 + " --group2 " + g2 +
                  " --output " + dir.file("b") + " --config " + cfg) == 2);
}

TEST_CASE("simulate-risk smoke run finishes quickly and is seed-stable") {
  TempDir dir;
  const std::string cfg = dir.file("risk.cfg");
  write_text(cfg,
             "p_grid = 50\n"
             "n = 10\n"
             "reps = 1\n"
             "seed = 99\n");
  const std::string out1 = dir.file("risk1");

  const auto start = std::chrono::steady_clock::now();
  const int rc = exit_code(cli() + " simulate-risk --config " + cfg +
                           " --output " + out1);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  CHECK((rc == 0 || rc == 3));
  CHECK(elapsed < 10.0);

  const std::string table = slurp(out1 + "/risk_table.csv");
  CHECK(count_lines(table) == 6);  // header + 5 estimators at one p
  CHECK(table.find("estimator,p,mean_loss,std_err") == 0);
  CHECK(table.find("runtime") == std::string::npos);
  const std::string plot = slurp(out1 + "/plot_risk.csv");
  CHECK(count_lines(plot) == 2);
  CHECK(plot.find("p,FM.LE,SURE-FM,SURE.Full-FM,MLE-Cov,SURE.Full-Cov") == 0);

  // Same seed: byte-identical table.  Different seed: different table.
  const std::string out2 = dir.file("risk2");
  CHECK((exit_code(cli() + " simulate-risk --config " + cfg + " --output " +
                   out2) == rc));
  CHECK(slurp(out2 + "/risk_table.csv") == table);

  const std::string out3 = dir.file("risk3");
  const int rc3 = exit_code(cli() + " simulate-risk --config " + cfg +
                            " --output " + out3 + " --seed 100");
  CHECK((rc3 == 0 || rc3 == 3));
  CHECK(slurp(out3 + "/risk_table.csv") != table);
}

TEST_CASE("simulate-risk rejects unknown config keys and missing output") {
  TempDir dir;
  const std::string cfg = dir.file("risk.cfg");
  write_text(cfg, "p_grid = 4\nreps = 1\nwhat_is_this = 1\n");
  CHECK(exit_code(cli() + " simulate-risk --config " + cfg + " --output " +
                  dir.file("x")) == 2);
  const std::string cfg2 = dir.file("risk2.cfg");
  write_text(cfg2, "p_grid = 4\nreps = 1\n");
  CHECK(exit_code(cli() + " simulate-risk --config " + cfg2) == 2);
}

TEST_CASE("simulate-groups writes metrics, sites, and the map") {
  TempDir dir;
  const std::string cfg = dir.file("groups.cfg");
  write_text(cfg,
             "rows = 8\n"
             "cols = 8\n"
             "n1 = 6\n"
             "n2 = 6\n"
             "seed = 5\n"
             "smooth_window = 3\n");
  const std::string out = dir.file("groups");
  const int rc = exit_code(cli() + " simulate-groups --config " + cfg +
                           " --output " + out);
  CHECK((rc == 0 || rc == 3));

  const std::string metrics = slurp(out + "/metrics.csv");
  CHECK(metrics.find("f1_tweedie") != std::string::npos);
  CHECK(metrics.find("mse_mom") != std::string::npos);
  const std::string sites = slurp(out + "/sites.csv");
  CHECK(count_lines(sites) == 65);
  CHECK(sites.find("site,row,col,truth_lambda,changed,t2,z,lambda_mom,"
                   "lambda_tweedie,selected,mom_fallback") == 0);
  const std::string map = slurp(out + "/map_tweedie.csv");
  CHECK(count_lines(map) == 65);

  // Determinism across runs.
  const std::string out2 = dir.file("groups2");
  CHECK(exit_code(cli() + " simulate-groups --config " + cfg + " --output " +
                  out2) == rc);
  CHECK(slurp(out2 + "/sites.csv") == sites);
  CHECK(slurp(out2 + "/metrics.csv") == metrics);
}

}  // TEST_SUITE
