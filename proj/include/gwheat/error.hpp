#pragma once

#include <stdexcept>
#include <string>

namespace gwheat {

enum class ErrorCode {
  invalid_input,    // malformed or out-of-range configuration / arguments
  not_transient,    // lambda >= m where a transient walk is required
  under_resolved,   // profile, shell or depth too short for the request
  numerical,        // a mathematically impossible result was observed
  resource_limit,   // memory guard or vertex cap exceeded
  internal,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace gwheat
