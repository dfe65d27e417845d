#pragma once

#include <stdexcept>
#include <string>

namespace npspec {

enum class ErrorCode {
  DegenerateChart,
  PoleSingularity,
  ResolutionTooLow,
  NotPositiveDefinite,
  NotAxisymmetric,
  OffsetTooSmall,
  ZeroCovector,
  FlowBlowup,
  AssumptionAViolated,
  EmptyFiber,
  EmptyWindow,
  DegenerateContrast,
  LambdaHalf,
  ZeroDensity,
  ZeroDistance,
  WavenumberTooLarge,
  SingularS,
  NoResonanceFound,
  BumpUnresolved,
  UnknownKind,
  MissingField,
  InvalidValue,
  IoFailure,
};

const char* to_string(ErrorCode c);

/// Exception carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace npspec
