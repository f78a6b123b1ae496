#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace itelab {

enum class ErrorCode {
  InvalidArgument,
  IllegalAction,
  IllegalMove,
  MalformedPathway,
  BucketInfeasible,
  UnknownToken,
  ParseError,
  InsufficientSamples,
  EmptyInput,
  NoCorruptionPossible,
  ContextOverflow,
  DivergenceDetected,
  InconsistentBuckets,
  InvalidConfig,
  Io,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the C
/// API maps them onto its status enum one-to-one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure with the 1-based line number of the offending record.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace itelab
