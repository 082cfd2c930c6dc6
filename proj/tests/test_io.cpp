#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "spdshrink/errors.hpp"
#include "spdshrink/geometry.hpp"
#include "spdshrink/io.hpp"
#include "spdshrink/rng.hpp"

namespace {

using namespace spdshrink;
namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spdshrink_io_test_" + std::to_string(::getpid()));
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

Matrix random_spd(int n, RngStream& rng) {
  Matrix g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  return sym_exp(symmetrize(g));
}

TensorField random_field(int p, int dim, int n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  TensorField field;
  field.N = dim;
  field.n = n;
  field.sites.resize(p);
  for (auto& site : field.sites) {
    for (int j = 0; j < n; ++j) site.push_back(random_spd(dim, rng));
  }
  return field;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("tensor fields round trip bit-exactly") {
  TempDir dir;
  const TensorField field = random_field(3, 3, 2, 99);
  const std::string path = dir.file("field.spdf");
  write_tensor_field(path, field);
  const TensorField back = read_tensor_field(path);
  CHECK(back.p() == 3);
  CHECK(back.N == 3);
  CHECK(back.n == 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK((back.sites[i][j].array() == field.sites[i][j].array()).all());
    }
  }
  // Writing the re-read field reproduces the file byte for byte.
  const std::string path2 = dir.file("field2.spdf");
  write_tensor_field(path2, back);
  std::ifstream a(path), b(path2);
  std::string content_a((std::istreambuf_iterator<char>(a)),
                        std::istreambuf_iterator<char>());
  std::string content_b((std::istreambuf_iterator<char>(b)),
                        std::istreambuf_iterator<char>());
  CHECK(content_a == content_b);
}

TEST_CASE("singleton identity field") {
  TempDir dir;
  TensorField field;
  field.N = 2;
  field.n = 1;
  field.sites = {{Matrix::Identity(2, 2)}};
  const std::string path = dir.file("one.spdf");
  write_tensor_field(path, field);
  const TensorField back = read_tensor_field(path);
  CHECK(back.p() == 1);
  CHECK((back.sites[0][0] - Matrix::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("reader rejects malformed files with precise diagnostics") {
  TempDir dir;

  const std::string bad_magic = dir.file("magic.spdf");
  write_text(bad_magic, "JUNK 1 2 1\n0 0 1 0 0 1\n");
  try {
    read_tensor_field(bad_magic);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::BadMagic);
  }

  const std::string truncated = dir.file("trunc.spdf");
  write_text(truncated,
             "SPDF1 2 2 2\n"
             "0 0 1 0 0 1\n"
             "0 1 2 0 0 2\n"
             "1 0 1 0 0 1\n");  // (1, 1) missing
  try {
    read_tensor_field(truncated);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::CorruptRecord);
    const std::string what = e.what();
    CHECK(what.find("site 1") != std::string::npos);
    CHECK(what.find("1") != std::string::npos);
  }

  const std::string dup = dir.file("dup.spdf");
  write_text(dup,
             "SPDF1 1 2 2\n"
             "0 0 1 0 0 1\n"
             "0 0 2 0 0 2\n");
  try {
    read_tensor_field(dup);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::CorruptRecord);
  }

  const std::string oob = dir.file("oob.spdf");
  write_text(oob,
             "SPDF1 1 2 1\n"
             "3 0 1 0 0 1\n");
  CHECK_THROWS_AS(read_tensor_field(oob), Error);

  const std::string garbled = dir.file("garbled.spdf");
  write_text(garbled,
             "SPDF1 1 2 1\n"
             "0 0 1 xyz 0 1\n");
  try {
    read_tensor_field(garbled);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::CorruptRecord);
  }

  const std::string bad_header = dir.file("header.spdf");
  write_text(bad_header, "SPDF1 0 2 1\n");
  CHECK_THROWS_AS(read_tensor_field(bad_header), Error);
}

TEST_CASE("reader names non-SPD blocks and can be asked to keep them") {
  TempDir dir;
  const std::string path = dir.file("notspd.spdf");
  write_text(path,
             "SPDF1 2 2 1\n"
             "0 0 1 0 0 1\n"
             "1 0 1 0 0 -1\n");
  try {
    read_tensor_field(path);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::NotSpd);
    const std::string what = e.what();
    CHECK(what.find("site 1") != std::string::npos);
  }
  const TensorField kept = read_tensor_field(path, false);
  CHECK(kept.p() == 2);
  CHECK(kept.sites[1][0](1, 1) == -1.0);
}

TEST_CASE("missing files raise IoError") {
  TempDir dir;
  CHECK_THROWS_AS(read_tensor_field(dir.file("absent.spdf")), Error);
  try {
    read_tensor_field(dir.file("absent.spdf"));
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::IoError);
  }
  const TensorField field = random_field(1, 2, 1, 7);
  CHECK_THROWS_AS(
      write_tensor_field("/nonexistent_dir_zz/x.spdf", field), Error);
}

TEST_CASE("config parsing handles comments, spacing, and types") {
  TempDir dir;
  const std::string path = dir.file("run.cfg");
  write_text(path,
             "# experiment setup\n"
             "alpha = 1\n"
             "  beta=2.5\t\n"
             "\n"
             "name = hello world\n"
             "grid = 1, 2,3\n"
             "names = a, b , c\n"
             "big = 18446744073709551615\n");
  const ConfigMap config = parse_config_file(path);
  CHECK(config.size() == 6);
  CHECK(config_int(config, "alpha", -1) == 1);
  CHECK(config_double(config, "beta", 0.0) == doctest::Approx(2.5));
  CHECK(config_string(config, "name", "") == "hello world");
  CHECK(config_int_list(config, "grid", {}) == std::vector<int>{1, 2, 3});
  CHECK(config_string_list(config, "names", {}) ==
        std::vector<std::string>{"a", "b", "c"});
  CHECK(config_u64(config, "big", 0) == 18446744073709551615ULL);

  // Defaults for absent keys.
  CHECK(config_int(config, "missing", 42) == 42);
  CHECK(config_double(config, "missing", 1.5) == 1.5);
  CHECK(config_string(config, "missing", "dflt") == "dflt");
  CHECK(config_int_list(config, "missing", {9}) == std::vector<int>{9});

  // Type errors on present keys.
  CHECK_THROWS_AS(config_int(config, "name", 0), Error);
  CHECK_THROWS_AS(config_double(config, "name", 0.0), Error);
  CHECK_THROWS_AS(config_int(config, "beta", 0), Error);  // not a full int
  CHECK_THROWS_AS(config_int_list(config, "names", {}), Error);
}

TEST_CASE("config parsing rejects malformed and duplicate lines") {
  TempDir dir;
  const std::string dup = dir.file("dup.cfg");
  write_text(dup, "a = 1\na = 2\n");
  try {
    parse_config_file(dup);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConfigError);
  }
  const std::string noeq = dir.file("noeq.cfg");
  write_text(noeq, "just a line\n");
  CHECK_THROWS_AS(parse_config_file(noeq), Error);
  CHECK_THROWS_AS(parse_config_file(dir.file("missing.cfg")), Error);
}

TEST_CASE("unknown keys are rejected fail-fast") {
  ConfigMap config{{"alpha", "1"}, {"zeta", "2"}};
  try {
    reject_unknown_keys(config, {"alpha", "beta"});
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConfigError);
    CHECK(std::string(e.what()).find("zeta") != std::string::npos);
  }
  CHECK_NOTHROW(reject_unknown_keys(config, {"alpha", "zeta"}));
  CHECK_NOTHROW(reject_unknown_keys({}, {}));
}

TEST_CASE("fmt_g17 round trips doubles exactly") {
  const std::vector<double> values = {1.0 / 3.0,
                                      0.1,
                                      1e-300,
                                      12345.6789012345678,
                                      -2.5e17,
                                      0.0,
                                      -0.0,
                                      6.02214076e23};
  for (const double v : values) {
    const double back = std::stod(fmt_g17(v));
    CHECK(back == v);
  }
  CHECK(fmt_g17(1.0) == "1");
  CHECK(fmt_g17(0.5) == "0.5");
}

}  // TEST_SUITE
