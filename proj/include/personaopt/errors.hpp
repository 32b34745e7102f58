#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace personaopt {

// Failure classes. Each maps onto one CLI exit code (see exit_code()).
enum class ErrorKind {
  format,     // unparseable input file
  data,       // well-formed input that violates an invariant
  capacity,   // not enough items to satisfy a request
  lookup,     // a named entity (step, item, run) does not exist
  domain,     // argument outside its mathematical domain
  config,     // bad configuration or client-side API misuse (HTTP 4xx)
  state,      // operation invoked in the wrong state
  transport,  // network failure after retries were exhausted
  integrity,  // persisted artifacts disagree with what was expected
};

std::string_view to_string(ErrorKind kind);

// 0 ok, 2 data, 3 config, 4 transport, 5 integrity.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace personaopt
