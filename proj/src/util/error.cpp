#include "cdd/error.hpp"

namespace cdd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLogits: return "malformed-logits";
    case ErrorCode::VocabMismatch: return "vocab-mismatch";
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::DegenerateDistribution: return "degenerate-distribution";
    case ErrorCode::PairIncompatible: return "pair-incompatible";
    case ErrorCode::Connection: return "connection";
    case ErrorCode::Io: return "io";
    case ErrorCode::Budget: return "budget";
    case ErrorCode::SessionLost: return "session-lost";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Usage: return "usage";
    case ErrorCode::InvalidInput: return "invalid-input";
  }
  return "unknown";
}

}  // namespace cdd
