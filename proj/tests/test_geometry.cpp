#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "spdshrink/errors.hpp"
#include "spdshrink/geometry.hpp"
#include "spdshrink/rng.hpp"

namespace {

using namespace spdshrink;

Matrix random_spd(int n, RngStream& rng, double spread = 1.0) {
  Matrix g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = spread * rng.normal();
  }
  return sym_exp(symmetrize(g));
}

double rel_fro(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.norm());
  return (a - b).norm() / scale;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("log/exp round trips stay within 1e-9") {
  RngStream rng(2024, 0);
  for (const int n : {2, 3, 6}) {
    for (int t = 0; t < 100; ++t) {
      const Matrix x = random_spd(n, rng);
      CHECK(rel_fro(sym_exp(sym_log(x)), x) <= 1e-9);
      Matrix g(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
      }
      const Matrix sym = symmetrize(g);
      CHECK(rel_fro(sym_log(sym_exp(sym)), sym) <= 1e-9);
    }
  }
}

TEST_CASE("ve is an isometry and matches the documented layout") {
  // Diagonal first, then the strict upper triangle row by row times sqrt(2).
  Matrix a(2, 2);
  a << 1.0, 3.0, 3.0, 2.0;
  const Vector v = ve(a);
  REQUIRE(v.size() == 3);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(2.0));
  CHECK(v(2) == doctest::Approx(3.0 * std::sqrt(2.0)));
  CHECK(rel_fro(ve_inv(v), a) <= 1e-15);

  RngStream rng(2024, 1);
  for (int t = 0; t < 50; ++t) {
    Matrix g(3, 3), h(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        g(i, j) = rng.normal();
        h(i, j) = rng.normal();
      }
    }
    const Matrix gs = symmetrize(g), hs = symmetrize(h);
    const double frob = (gs - hs).norm();
    const double vec = (ve(gs) - ve(hs)).norm();
    CHECK(std::fabs(frob - vec) <= 1e-12 * std::max(1.0, frob));
    CHECK(rel_fro(ve_inv(ve(gs)), gs) <= 1e-14);
  }
}

TEST_CASE("vec_dim / mat_dim are inverse maps") {
  CHECK(vec_dim(1) == 1);
  CHECK(vec_dim(2) == 3);
  CHECK(vec_dim(3) == 6);
  CHECK(vec_dim(6) == 21);
  CHECK(mat_dim(1) == 1);
  CHECK(mat_dim(3) == 2);
  CHECK(mat_dim(6) == 3);
  CHECK(mat_dim(21) == 6);
  CHECK_THROWS_AS(mat_dim(5), Error);
  try {
    mat_dim(7);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::BadLength);
  }
}

TEST_CASE("sym_log rejects non-SPD input, sym_exp rejects overflow") {
  Matrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(sym_log(indefinite), Error);
  try {
    sym_log(Matrix::Zero(2, 2));
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::NotSpd);
  }

  Matrix huge = Matrix::Zero(2, 2);
  huge.diagonal() << 701.0, 0.0;
  try {
    sym_exp(huge);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::Overflow);
  }
  // At the cap itself the result is still finite.
  Matrix at_cap = Matrix::Zero(2, 2);
  at_cap.diagonal() << 699.0, 0.0;
  CHECK(std::isfinite(sym_exp(at_cap)(0, 0)));

  CHECK_THROWS_AS(symmetrize(Matrix::Zero(2, 3)), Error);
}

TEST_CASE("dist_le is a metric and is translation invariant in log space") {
  RngStream rng(2024, 2);
  for (int t = 0; t < 25; ++t) {
    const Matrix x = random_spd(3, rng);
    const Matrix y = random_spd(3, rng);
    const Matrix z = random_spd(3, rng);
    CHECK(dist_le(x, x) <= 1e-12);
    CHECK(dist_le(x, y) == doctest::Approx(dist_le(y, x)));
    CHECK(dist_le(x, y) >= 0.0);
    CHECK(dist_le(x, z) <= dist_le(x, y) + dist_le(y, z) + 1e-10);

    // Adding a common log offset keeps distances unchanged.
    const Matrix c = random_spd(3, rng, 0.5);
    const Matrix xs = sym_exp(symmetrize(sym_log(c) + sym_log(x)));
    const Matrix ys = sym_exp(symmetrize(sym_log(c) + sym_log(y)));
    CHECK(std::fabs(dist_le(xs, ys) - dist_le(x, y)) <=
          1e-8 * std::max(1.0, dist_le(x, y)));
  }
}

TEST_CASE("frechet_mean_le matches the gradient-descent oracle") {
  RngStream rng(2024, 3);
  for (const int n : {2, 3}) {
    std::vector<Matrix> xs;
    for (int i = 0; i < 7; ++i) xs.push_back(random_spd(n, rng));
    const Matrix mean = frechet_mean_le(xs);
    const Matrix ref = oracle::frechet_mean_descent(xs);
    CHECK(rel_fro(mean, ref) <= 1e-8);
    // The mean of a single matrix is the matrix.
    CHECK(rel_fro(frechet_mean_le({xs[0]}), xs[0]) <= 1e-12);
  }
  CHECK_THROWS_AS(frechet_mean_le({}), Error);
  try {
    frechet_mean_le({});
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::EmptyInput);
  }
  RngStream rng2(2024, 4);
  CHECK_THROWS_AS(frechet_mean_le({random_spd(2, rng2), random_spd(3, rng2)}),
                  Error);
}

TEST_CASE("inv_spd inverts SPD matrices and rejects others") {
  RngStream rng(2024, 5);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = random_spd(4, rng);
    const Matrix id = x * inv_spd(x);
    CHECK((id - Matrix::Identity(4, 4)).norm() <= 1e-10 * x.norm());
  }
  Matrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(inv_spd(indefinite), Error);
}

TEST_CASE("require_spd names the offending argument") {
  Matrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, -2.0;
  try {
    require_spd(bad, "prior scale");
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::NotSpd);
    CHECK(std::string(e.what()).find("prior scale") != std::string::npos);
  }
  CHECK_NOTHROW(require_spd(Matrix::Identity(3, 3), "identity"));
}

TEST_CASE("spd_eps scales with the largest eigenvalue") {
  CHECK(spd_eps(0.5) == doctest::Approx(1e-12));
  CHECK(spd_eps(1.0) == doctest::Approx(1e-12));
  CHECK(spd_eps(100.0) == doctest::Approx(1e-10));
}

}  // TEST_SUITE
