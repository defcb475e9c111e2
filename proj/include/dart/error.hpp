#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dart {

enum class Errc {
  invalid_argument,
  resource_exhausted,
  not_a_member,
  not_initialized,
  out_of_global_memory,
  invalid_pointer,
  epoch_violation,
  invalid_state,
  invalid_config,
  io_error,
  timeout,
  aborted,
  unimplemented,
};

std::string_view to_string(Errc code) noexcept;

/// Every runtime failure surfaces as a dart::Error carrying a category code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace dart
