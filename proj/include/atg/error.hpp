#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atg {

/// Domain error categories. The string form is the machine-parsable prefix
/// printed by the CLI (`error:<code>:<detail>`).
enum class ErrorCode {
  invalid_input,
  schema,
  unknown_route,
  degenerate_route,
  non_planarizable,
  missing_geometry,
  target_unreachable,
  empty_input,
  zero_baseline,
  no_valid_scenario,
  transport,
  auth,
  budget_exhausted,
  empty_store,
  store_exists,
  io,
  precondition,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::schema: return "schema";
    case ErrorCode::unknown_route: return "unknown-route";
    case ErrorCode::degenerate_route: return "degenerate-route";
    case ErrorCode::non_planarizable: return "non-planarizable";
    case ErrorCode::missing_geometry: return "missing-geometry";
    case ErrorCode::target_unreachable: return "target-unreachable";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::zero_baseline: return "zero-baseline";
    case ErrorCode::no_valid_scenario: return "no-valid-scenario";
    case ErrorCode::transport: return "transport";
    case ErrorCode::auth: return "auth";
    case ErrorCode::budget_exhausted: return "budget-exhausted";
    case ErrorCode::empty_store: return "empty-store";
    case ErrorCode::store_exists: return "store-exists";
    case ErrorCode::io: return "io";
    case ErrorCode::precondition: return "precondition";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail)
      : std::runtime_error("error:" + std::string(to_string(code)) + ":" + detail),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace atg
