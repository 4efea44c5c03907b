#pragma once

#include <stdexcept>
#include <string>

namespace cforge {

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kIo,
  kParse,
  kTransport,
  kAuthentication,
  kRateLimited,
  kEmptyCompletion,
  kUnscripted,
  kExhausted,
  kValidation,
  kStage,
};

const char* ErrorCodeName(ErrorCode code);

// Base exception for everything the core library throws. The C API maps
// `code()` onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cforge
