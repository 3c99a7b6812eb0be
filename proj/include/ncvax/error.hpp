#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ncvax {

enum class ErrorCode {
  // input validation
  MissingColumn,
  ParseError,
  InvariantViolation,
  UnbinnedNumericKey,
  InvalidConfig,
  InvalidScenario,
  InvalidOptions,
  DimensionMismatch,
  MalformedInput,
  // estimation
  NonConvergence,
  SingularJacobian,
  InadmissibleInit,
  SingularBread,
  DegenerateArm,
  DegenerateNegativeControl,
  NonpositiveAdjustedMean,
  AllStrataDegenerate,
  RankDeficientDesign,
  ZeroVariance,
  TargetUnreachable,
  AllRepsFailed,
};

std::string_view to_string(ErrorCode code);

/// True for codes caused by bad input rather than by the data failing an
/// estimator; the CLI maps the two groups to different exit statuses.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ncvax
