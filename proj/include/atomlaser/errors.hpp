#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace atomlaser {

enum class ErrorKind {
  config_invalid,
  precondition,
  airy_range,
  unconverged_quadrature,
  truncated_spectrum,
  unresolved_beat,
  unresolved_sinc,
  grid_overflow,
  grid_mismatch,
  instability,
  non_convergence,
  unsupported_sublevel,
  zero_projection,
  undersampled_beat,
  too_few_periods,
  strict_warning,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config_invalid: return "config-invalid";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::airy_range: return "airy-range";
    case ErrorKind::unconverged_quadrature: return "unconverged-quadrature";
    case ErrorKind::truncated_spectrum: return "truncated-spectrum";
    case ErrorKind::unresolved_beat: return "unresolved-beat";
    case ErrorKind::unresolved_sinc: return "unresolved-sinc";
    case ErrorKind::grid_overflow: return "grid-overflow";
    case ErrorKind::grid_mismatch: return "grid-mismatch";
    case ErrorKind::instability: return "instability";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::unsupported_sublevel: return "unsupported-sublevel";
    case ErrorKind::zero_projection: return "zero-projection";
    case ErrorKind::undersampled_beat: return "undersampled-beat";
    case ErrorKind::too_few_periods: return "too-few-periods";
    case ErrorKind::strict_warning: return "strict-warning";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Non-fatal diagnostics (weak-coupling violations, approximation validity).
// The default handler prints to stderr; the CLI swaps in a collecting or
// throwing handler for --strict.
using WarningHandler = std::function<void(std::string_view kind, std::string_view message)>;

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view kind, std::string_view message) {
    std::cerr << "warning [" << kind << "]: " << message << '\n';
  };
  return handler;
}
}  // namespace detail

inline WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(detail::warning_mutex());
  auto previous = std::move(detail::warning_handler());
  detail::warning_handler() = std::move(handler);
  return previous;
}

inline void warn(std::string_view kind, std::string_view message) {
  WarningHandler handler;
  {
    std::lock_guard lock(detail::warning_mutex());
    handler = detail::warning_handler();
  }
  if (handler) handler(kind, message);
}

// Restores the previous handler on scope exit.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler handler)
      : previous_(set_warning_handler(std::move(handler))) {}
  ~ScopedWarningHandler() { set_warning_handler(std::move(previous_)); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler previous_;
};

}  // namespace atomlaser
