#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "spdshrink/errors.hpp"
#include "spdshrink/rng.hpp"

namespace {

using namespace spdshrink;

struct Moments {
  double mean = 0.0;
  double var = 0.0;    // unbiased
  double min = 0.0;
  double max = 0.0;
};

template <typename Draw>
Moments collect(int count, Draw draw) {
  std::vector<double> xs(count);
  for (auto& x : xs) x = draw();
  Moments m;
  m.min = xs[0];
  m.max = xs[0];
  for (double x : xs) {
    m.mean += x;
    m.min = std::min(m.min, x);
    m.max = std::max(m.max, x);
  }
  m.mean /= count;
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= (count - 1);
  return m;
}

}  // namespace

TEST_SUITE("rng") {

TEST_CASE("same (seed, id) reproduces the full sequence") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(42, 7), d(42, 7);
  for (int i = 0; i < 200; ++i) {
    CHECK(c.uniform() == d.uniform());
    CHECK(c.normal() == d.normal());
    CHECK(c.gamma(1.3) == d.gamma(1.3));
    CHECK(c.chi2(5.0) == d.chi2(5.0));
  }
}

TEST_CASE("different stream ids and seeds give different sequences") {
  RngStream a(42, 0), b(42, 1), c(43, 0);
  int diff_id = 0, diff_seed = 0;
  RngStream a2(42, 0);
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va != b.next_u64()) ++diff_id;
    if (a2.next_u64() != c.next_u64()) ++diff_seed;
  }
  CHECK(diff_id > 60);
  CHECK(diff_seed > 60);
}

TEST_CASE("uniform lies in the open interval with the right moments") {
  RngStream rng(7, 0);
  const int n = 200000;
  const Moments m = collect(n, [&] { return rng.uniform(); });
  CHECK(m.min > 0.0);
  CHECK(m.max < 1.0);
  // SE(mean) = 1/sqrt(12 n); SE(var) ~ sqrt(1/180 - 1/144 + ...) / sqrt(n),
  // bounded by 0.5/sqrt(n) comfortably.
  CHECK(std::fabs(m.mean - 0.5) <= 5.0 / std::sqrt(12.0 * n));
  CHECK(std::fabs(m.var - 1.0 / 12.0) <= 2.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("normal moments") {
  RngStream rng(7, 1);
  const int n = 200000;
  const Moments m = collect(n, [&] { return rng.normal(); });
  CHECK(std::fabs(m.mean) <= 5.0 / std::sqrt(static_cast<double>(n)));
  // Var of the sample variance of a normal is 2/(n-1).
  CHECK(std::fabs(m.var - 1.0) <= 5.0 * std::sqrt(2.0 / (n - 1.0)));
}

TEST_CASE("gamma moments for shapes below and above one") {
  const int n = 120000;
  for (const double shape : {0.5, 1.7, 4.2}) {
    RngStream rng(11, static_cast<std::uint64_t>(shape * 100));
    const Moments m = collect(n, [&] { return rng.gamma(shape); });
    CHECK(m.min > 0.0);
    // mean = shape, var = shape for unit scale.
    CHECK(std::fabs(m.mean - shape) <=
          5.0 * std::sqrt(shape / static_cast<double>(n)));
    // Var of the sample variance involves the fourth central moment
    // mu4 = 3 shape^2 + 6 shape; SE(var) ~ sqrt((mu4 - shape^2)/n).
    const double mu4 = 3.0 * shape * shape + 6.0 * shape;
    CHECK(std::fabs(m.var - shape) <=
          5.0 * std::sqrt((mu4 - shape * shape) / static_cast<double>(n)));
  }
}

TEST_CASE("chi2 moments") {
  RngStream rng(13, 3);
  const int n = 120000;
  const double dof = 6.0;
  const Moments m = collect(n, [&] { return rng.chi2(dof); });
  CHECK(std::fabs(m.mean - dof) <=
        5.0 * std::sqrt(2.0 * dof / static_cast<double>(n)));
  // mu4 of chi2_k is 12 k (k + 4); SE(var) ~ sqrt((mu4 - (2k)^2)/n).
  const double mu4 = 12.0 * dof * (dof + 4.0);
  CHECK(std::fabs(m.var - 2.0 * dof) <=
        5.0 * std::sqrt((mu4 - 4.0 * dof * dof) / static_cast<double>(n)));
}

TEST_CASE("invalid shape and dof are rejected") {
  RngStream rng(1, 1);
  CHECK_THROWS_AS(rng.gamma(0.0), Error);
  CHECK_THROWS_AS(rng.gamma(-1.5), Error);
  CHECK_THROWS_AS(rng.chi2(0.0), Error);
  try {
    rng.gamma(-1.0);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Err::BadDof);
  }
}

}  // TEST_SUITE
