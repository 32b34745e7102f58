#include "personaopt/errors.hpp"

namespace personaopt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::data: return "data";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::domain: return "domain";
    case ErrorKind::config: return "config";
    case ErrorKind::state: return "state";
    case ErrorKind::transport: return "transport";
    case ErrorKind::integrity: return "integrity";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format:
    case ErrorKind::data:
    case ErrorKind::capacity:
    case ErrorKind::lookup:
      return 2;
    case ErrorKind::domain:
    case ErrorKind::config:
    case ErrorKind::state:
      return 3;
    case ErrorKind::transport:
      return 4;
    case ErrorKind::integrity:
      return 5;
  }
  return 1;
}

}  // namespace personaopt
