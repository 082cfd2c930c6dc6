#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace spdshrink {

// Failure categories surfaced by the library.  Every throw site uses Error
// with one of these codes so callers (and the CLI) can map failures to exit
// behaviour without string matching.
enum class Err {
  NotSpd,             // matrix expected to be symmetric positive definite is not
  DimMismatch,        // inputs disagree on matrix / vector dimensions
  BadLength,          // vector length is not a valid half-vectorization size
  EmptyInput,         // an operation received zero samples / sites
  Overflow,           // matrix exponential would overflow double range
  BadDof,             // degrees of freedom outside the valid range
  BadProb,            // probability argument outside (0, 1)
  TooFewSamples,      // fewer observations than the method requires
  BadN,               // per-site sample count too small for the estimator
  SingularScatter,    // a site scatter matrix is numerically singular
  SingularPooled,     // a pooled covariance is numerically singular
  OptFailed,          // optimizer could not make progress from the start point
  IrlsDiverged,       // Poisson regression iterations diverged
  DegenerateSupport,  // histogram support is degenerate (or values not finite)
  DenominatorNearZero,// score-based adjustment denominator under threshold
  NonConvergence,     // iterative scheme hit its iteration cap (non-fatal)
  BadMagic,           // input file does not start with the expected header
  CorruptRecord,      // input file record is malformed, duplicated, or missing
  ConfigError,        // configuration file has unknown or invalid entries
  IoError             // filesystem / stream failure
};

inline const char* err_name(Err code) {
  switch (code) {
    case Err::NotSpd: return "NotSpd";
    case Err::DimMismatch: return "DimMismatch";
    case Err::BadLength: return "BadLength";
    case Err::EmptyInput: return "EmptyInput";
    case Err::Overflow: return "Overflow";
    case Err::BadDof: return "BadDof";
    case Err::BadProb: return "BadProb";
    case Err::TooFewSamples: return "TooFewSamples";
    case Err::BadN: return "BadN";
    case Err::SingularScatter: return "SingularScatter";
    case Err::SingularPooled: return "SingularPooled";
    case Err::OptFailed: return "OptFailed";
    case Err::IrlsDiverged: return "IrlsDiverged";
    case Err::DegenerateSupport: return "DegenerateSupport";
    case Err::DenominatorNearZero: return "DenominatorNearZero";
    case Err::NonConvergence: return "NonConvergence";
    case Err::BadMagic: return "BadMagic";
    case Err::CorruptRecord: return "CorruptRecord";
    case Err::ConfigError: return "ConfigError";
    case Err::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Err code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Err code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace spdshrink
