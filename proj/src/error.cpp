#include "dart/error.hpp"

namespace dart {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::resource_exhausted: return "resource-exhausted";
    case Errc::not_a_member: return "not-a-member";
    case Errc::not_initialized: return "not-initialized";
    case Errc::out_of_global_memory: return "out-of-global-memory";
    case Errc::invalid_pointer: return "invalid-pointer";
    case Errc::epoch_violation: return "epoch-violation";
    case Errc::invalid_state: return "invalid-state";
    case Errc::invalid_config: return "invalid-config";
    case Errc::io_error: return "io-error";
    case Errc::timeout: return "timeout";
    case Errc::aborted: return "aborted";
    case Errc::unimplemented: return "unimplemented";
  }
  return "unknown";
}

}  // namespace dart
