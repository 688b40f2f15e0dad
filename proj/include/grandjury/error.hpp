#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grandjury {

// Machine-readable failure categories. The names double as the wire-level
// `code` in API error bodies, so they must stay stable.
enum class ErrorCode {
  MissingField,
  VoteOutOfRange,
  BadTimestamp,
  NegativeInput,
  EmptyBatch,
  LengthMismatch,
  NonPositiveReputation,
  DomainError,
  NonMonotoneTime,
  EmptySelection,
  EmptyRoster,
  NoVotes,
  UnknownReference,
  UnknownInference,
  UnknownCollection,
  AlreadyCommitted,
  DuplicateId,
  DuplicateCollection,
  CorruptLedger,
  StorageFailure,
  SchemaError,
  RowError,
  InvalidConfig,
  BadRequest,
  Unauthorized,
  NotFound,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace grandjury
