#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdd {

enum class ErrorCode {
  MalformedLogits,
  VocabMismatch,
  InvalidParameter,
  DegenerateDistribution,
  PairIncompatible,
  Connection,
  Io,              // retryable transport failure
  Budget,          // context overflow
  SessionLost,
  Schema,          // wire or file payload does not match the expected shape
  Unsupported,     // e.g. a top-k-only endpoint
  Precondition,
  Usage,
  InvalidInput,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  bool retryable() const noexcept {
    return code_ == ErrorCode::Io || code_ == ErrorCode::Connection;
  }

 private:
  ErrorCode code_;
};

}  // namespace cdd
