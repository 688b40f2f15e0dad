#include "grandjury/error.hpp"

namespace grandjury {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::VoteOutOfRange: return "VoteOutOfRange";
    case ErrorCode::BadTimestamp: return "BadTimestamp";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveReputation: return "NonPositiveReputation";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyRoster: return "EmptyRoster";
    case ErrorCode::NoVotes: return "NoVotes";
    case ErrorCode::UnknownReference: return "UnknownReference";
    case ErrorCode::UnknownInference: return "UnknownInference";
    case ErrorCode::UnknownCollection: return "UnknownCollection";
    case ErrorCode::AlreadyCommitted: return "AlreadyCommitted";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DuplicateCollection: return "DuplicateCollection";
    case ErrorCode::CorruptLedger: return "CorruptLedger";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::RowError: return "RowError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace grandjury
