#include "gwheat/error.hpp"

namespace gwheat {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::not_transient: return "not_transient";
    case ErrorCode::under_resolved: return "under_resolved";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::resource_limit: return "resource_limit";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace gwheat
