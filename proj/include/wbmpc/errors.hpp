#pragma once

#include <stdexcept>
#include <string>

namespace wbmpc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

/// Mass matrix failed its Cholesky factorization.
struct FactorizationFailure : Error {
  using Error::Error;
};

/// A step produced NaN/Inf. `stage` is -1 when the caller has no stage context.
struct NonFiniteState : Error {
  NonFiniteState(const std::string& what, int stage_index = -1)
      : Error(what), stage(stage_index) {}
  int stage;
};

struct NotPositiveDefinite : Error {
  NotPositiveDefinite(const std::string& what, int stage_index)
      : Error(what), stage(stage_index) {}
  int stage;
};

struct SingularKKT : Error {
  using Error::Error;
};

struct LineSearchFailed : Error {
  using Error::Error;
};

/// MPC kept failing for more consecutive updates than the fallback allows.
struct SolverDiverged : Error {
  using Error::Error;
};

struct NotPrepared : Error {
  using Error::Error;
};

struct NoStanceFeet : Error {
  using Error::Error;
};

struct NoPeriodicity : Error {
  using Error::Error;
};

struct MaxIterations : Error {
  using Error::Error;
};

struct TaskFailed : Error {
  using Error::Error;
};

/// Parse or validation failure in a task file. `field` is the dotted key path.
struct ConfigError : Error {
  ConfigError(const std::string& field_path, const std::string& what, int line_number = -1)
      : Error(format(field_path, what, line_number)), field(field_path), line(line_number) {}
  std::string field;
  int line;

 private:
  static std::string format(const std::string& f, const std::string& w, int l) {
    std::string s = "config error";
    if (l >= 0) s += " (line " + std::to_string(l + 1) + ")";
    s += " at '" + f + "': " + w;
    return s;
  }
};

}  // namespace wbmpc
