#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace advloss {

enum class ErrorCode {
  shape_mismatch,
  arity,
  invalid_value,
  syntax,
  unknown_operator,
  not_found,
  unsupported_loss,
  gradient_unsupported,
  dimension,
  malformed_file,
  inconsistent_file,
  io,
  divergence,
  invalid_argument,
  config,
};

std::string_view error_code_name(ErrorCode code);

// Every failure surfaced by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace advloss
