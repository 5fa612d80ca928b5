#pragma once

#include <stdexcept>
#include <string>

namespace sdsl {

// Error categories; values align with the C API status codes.
enum class ErrorCode : int {
  Ok = 0,
  Io = 1,
  Parse = 2,          // malformed files or program text
  Type = 3,           // DSL type errors
  Validation = 4,     // data invariant violations
  UnknownFunction = 5,
  UnknownObject = 6,
  AmbiguousQuery = 7,
  NoMatch = 8,
  Desugar = 9,
  Unmatched = 10,     // instruction matches no template
  BadTimeWindow = 11,
  Unresolvable = 12,
  IllegalSamplerCond = 13,
  Infeasible = 14,    // pose sampling exhausted
  PlanFailure = 15,
  TrackingFailure = 16,
  NumericalBlowup = 17,
  NonConvergence = 18,
  TapeMismatch = 19,
  InvalidArgument = 20,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

const char* error_code_name(ErrorCode code);

}  // namespace sdsl
