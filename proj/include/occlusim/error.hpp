#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace occlusim {

enum class ErrorCode {
  InvalidArgument,
  InvalidSpec,
  InvalidConfig,
  InvalidCommand,
  UnorderedEvents,
  OutOfOrderSample,
  InvalidTrace,
  IncompleteTrial,
  EmptyWindow,
  EmptyInput,
  Io,
  AlreadyExists,
  MalformedHeader,
  MalformedRow,
  NonMonotoneTime,
  UnknownEventKind,
  EventOutOfRange,
  MalformedSidecar,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidSpec: return "invalid occluder spec";
    case ErrorCode::InvalidConfig: return "invalid config";
    case ErrorCode::InvalidCommand: return "invalid command";
    case ErrorCode::UnorderedEvents: return "unordered events";
    case ErrorCode::OutOfOrderSample: return "out-of-order sample";
    case ErrorCode::InvalidTrace: return "invalid trace";
    case ErrorCode::IncompleteTrial: return "incomplete trial";
    case ErrorCode::EmptyWindow: return "empty final window";
    case ErrorCode::EmptyInput: return "empty input";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::AlreadyExists: return "already exists";
    case ErrorCode::MalformedHeader: return "malformed header";
    case ErrorCode::MalformedRow: return "malformed row";
    case ErrorCode::NonMonotoneTime: return "non-monotone time";
    case ErrorCode::UnknownEventKind: return "unknown event kind";
    case ErrorCode::EventOutOfRange: return "event outside trace";
    case ErrorCode::MalformedSidecar: return "malformed sidecar";
  }
  return "unknown error";
}

/// Library-wide exception. `code()` distinguishes failure classes so callers
/// (CLI, session layer, tests) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace occlusim
