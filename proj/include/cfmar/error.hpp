#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfmar {

enum class ErrorCode {
  parameter,       // invalid configuration value
  contract,        // precondition on an input violated
  format,          // malformed or inconsistent file
  grid_mismatch,   // volumes/masks on different grids
  unknown_preset,  // phantom preset name not recognized
  io,              // file system failure
  numerical,       // solver or reconstruction failure
};

std::string_view error_slug(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view slug() const { return error_slug(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace cfmar
