#pragma once

#include <cstdint>

#include <random>

// Counter-addressable random streams.  A stream is identified by
// (seed, stream_id); distinct ids give statistically independent sequences,
// and the same pair always reproduces the same sequence.  All variate
// transforms are implemented here rather than with <random> distribution
// classes because the standard leaves those algorithms implementation
// defined, which would break byte-identical reproducibility across
// toolchains.

namespace spdshrink {

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal via the Marsaglia polar method (second variate cached).
  double normal();

  // Gamma(shape, scale=1), shape > 0, Marsaglia-Tsang squeeze method.
  double gamma(double shape);

  // Chi-square with dof > 0 degrees of freedom.
  double chi2(double dof);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace spdshrink
