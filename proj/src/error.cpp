#include "odes/error.hpp"

namespace odes {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::BoundExceeded: return "BoundExceeded";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingDelta: return "MissingDelta";
    case ErrorCode::RoundMismatch: return "RoundMismatch";
    case ErrorCode::RankOutOfBounds: return "RankOutOfBounds";
    case ErrorCode::DuplicateRid: return "DuplicateRid";
    case ErrorCode::UnknownRid: return "UnknownRid";
    case ErrorCode::MalformedIndexFile: return "MalformedIndexFile";
    case ErrorCode::CorruptStateFile: return "CorruptStateFile";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::IncompleteRound: return "IncompleteRound";
    case ErrorCode::ReplicaDivergence: return "ReplicaDivergence";
    case ErrorCode::IncompleteResponses: return "IncompleteResponses";
    case ErrorCode::UnknownRecipient: return "UnknownRecipient";
    case ErrorCode::ConnectionLost: return "ConnectionLost";
    case ErrorCode::ProtocolTimeout: return "ProtocolTimeout";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace odes
