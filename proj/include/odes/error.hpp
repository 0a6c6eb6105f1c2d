#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace odes {

enum class ErrorCode {
  ConfigError,
  BoundExceeded,
  LengthMismatch,
  MissingDelta,
  RoundMismatch,
  RankOutOfBounds,
  DuplicateRid,
  UnknownRid,
  MalformedIndexFile,
  CorruptStateFile,
  MalformedMessage,
  IncompleteRound,
  ReplicaDivergence,
  IncompleteResponses,
  UnknownRecipient,
  ConnectionLost,
  ProtocolTimeout,
  TransportError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace odes
