#pragma once

#include <stdexcept>
#include <string>

namespace tpart {

enum class ErrorCode {
  kDuplicateName,
  kInvalidSchema,
  kUnknownTable,
  kUnknownColumn,
  kUnknownMapper,
  kUnknownProcedure,
  kDuplicateKey,
  kNotFound,
  kReplicatedWrite,
  kPartitionRange,
  kDuplicateTarget,
  kInFlight,
  kInvalidConfig,
  kRegistryFrozen,
  kLivelock,
  kMalformedHistory,
  kDimensionMismatch,
  kSizeCap,
  kDecode,
  kIo,
  kUser,
};

const char* error_code_name(ErrorCode code);

/// Engine-level failure. Inside a procedure body any EngineError aborts the
/// enclosing root transaction with reason user-error.
class EngineError : public std::runtime_error {
 public:
  EngineError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by procedure bodies to abort on a business rule (e.g. TPC-C sanity
/// checks).
class UserAbort : public EngineError {
 public:
  explicit UserAbort(const std::string& what) : EngineError(ErrorCode::kUser, what) {}
};

}  // namespace tpart
