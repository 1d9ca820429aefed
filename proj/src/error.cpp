#include "cfmar/error.hpp"

namespace cfmar {

std::string_view error_slug(ErrorCode code) {
  switch (code) {
    case ErrorCode::parameter: return "invalid_parameter";
    case ErrorCode::contract: return "contract_violation";
    case ErrorCode::format: return "format_error";
    case ErrorCode::grid_mismatch: return "grid_mismatch";
    case ErrorCode::unknown_preset: return "unknown_preset";
    case ErrorCode::io: return "io_error";
    case ErrorCode::numerical: return "numerical_failure";
  }
  return "unknown";
}

}  // namespace cfmar
