#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hptune {

enum class ErrorCode {
  // core_model
  MissingColumn,
  CoverageGap,
  ParseError,
  InvalidArgument,
  // building_sim
  DomainError,
  NumericalBlowup,
  // sysid_arx
  RankDeficient,
  InsufficientData,
  UnstableModel,
  HistoryTooShort,
  // qp_solver
  NotPsd,
  // mpc_controllers
  ForecastTooShort,
  NodeLimitHit,
  RelaxationInfeasible,
  // comfort_pmv
  NoConvergence,
  NoOccupiedSteps,
  // billing
  GridMismatch,
  SpanMismatch,
  MissingMonthPrice,
  DuplicateCode,
  SchemaError,
  // gp_regression
  CholeskyFailure,
  NegativeVariance,
  // config_optimizer
  NoFeasibleCandidate,
  BlackboxFailure,
  // harness
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception; `code()` identifies the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix, for re-wrapping with more context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace hptune
