#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spdshrink/geometry.hpp"

// Text formats: a tensor-field container for SPD observations and a
// key=value run configuration.  Everything is plain text for auditability;
// floating point values are printed with 17 significant digits so that
// write -> read round trips are bit-exact.

namespace spdshrink {

// File layout ("SPDF1" format):
//   line 1:  SPDF1 <p> <N> <n>
//   then p*n records, one per line:  <site> <obs> <N*N row-major values>
// Records may appear in any order; every (site, obs) pair must appear
// exactly once.
struct TensorField {
  int N = 0;                               // matrix dimension
  int n = 0;                               // observations per site
  std::vector<std::vector<Matrix>> sites;  // p sites, n matrices each

  int p() const { return static_cast<int>(sites.size()); }
};

void write_tensor_field(const std::string& path, const TensorField& field);

// Throws BadMagic on a wrong header, CorruptRecord on malformed, duplicate,
// or missing records (naming the first offender), IoError when the file
// cannot be opened, and NotSpd (naming site/obs) when reject_non_spd is set.
TensorField read_tensor_field(const std::string& path,
                              bool reject_non_spd = true);

// key=value configuration: one pair per line, '#' starts a comment, blank
// lines ignored, duplicate keys rejected.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_file(const std::string& path);

// Fail-fast guard: every present key must be in `allowed` (ConfigError).
void reject_unknown_keys(const ConfigMap& config,
                         const std::vector<std::string>& allowed);

// Typed accessors returning `fallback` when the key is absent and throwing
// ConfigError when a present value does not parse.
int config_int(const ConfigMap& config, const std::string& key, int fallback);
double config_double(const ConfigMap& config, const std::string& key,
                     double fallback);
std::uint64_t config_u64(const ConfigMap& config, const std::string& key,
                         std::uint64_t fallback);
std::string config_string(const ConfigMap& config, const std::string& key,
                          const std::string& fallback);
std::vector<int> config_int_list(const ConfigMap& config,
                                 const std::string& key,
                                 const std::vector<int>& fallback);
std::vector<std::string> config_string_list(
    const ConfigMap& config, const std::string& key,
    const std::vector<std::string>& fallback);

// Shortest representation with 17 significant digits (%.17g).
std::string fmt_g17(double value);

}  // namespace spdshrink
