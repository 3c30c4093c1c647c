#pragma once

#include <stdexcept>
#include <string>

namespace cuspflow {

enum class ErrorCode {
  invalid_argument = 1,
  precondition_failed,
  budget_exceeded,
  iteration_cap_exceeded,
  ill_conditioned,
  non_finite,
  parse_error,
  schema_mismatch,
  io_error,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the core carries a machine-readable code; the C API
// maps it onto cf_status one-to-one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace cuspflow
