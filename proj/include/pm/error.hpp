#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pm {

enum class ErrorCode {
  // corpus
  MalformedManifest,
  DuplicateId,
  RowOutOfRange,
  BadMagic,
  DimensionMismatch,
  NonFiniteValue,
  NotNormalized,
  IoError,
  NotFound,
  // backends
  BackendUnavailable,
  BackendTimeout,
  UndecodableImage,
  InvalidRange,
  PartialFailure,
  // retrieval / projection / clustering
  ZeroVector,
  EmptyCorpus,
  NonFiniteInput,
  ShapeMismatch,
  NonFinitePoint,
  // keywords
  UnknownCluster,
  UnknownTerm,
  EmptySelection,
  // evaluation / layout
  EmptyKeyword,
  NoOccurrences,
  // session / api
  UnknownRecord,
  VersionMismatch,
  PipelineFailure,
  InvalidInput,
  UnknownSession,
  CorpusNotLoaded,
};

inline constexpr ErrorCode kAllErrorCodes[] = {
    ErrorCode::MalformedManifest, ErrorCode::DuplicateId,     ErrorCode::RowOutOfRange,
    ErrorCode::BadMagic,          ErrorCode::DimensionMismatch, ErrorCode::NonFiniteValue,
    ErrorCode::NotNormalized,     ErrorCode::IoError,         ErrorCode::NotFound,
    ErrorCode::BackendUnavailable, ErrorCode::BackendTimeout, ErrorCode::UndecodableImage,
    ErrorCode::InvalidRange,      ErrorCode::PartialFailure,  ErrorCode::ZeroVector,
    ErrorCode::EmptyCorpus,       ErrorCode::NonFiniteInput,  ErrorCode::ShapeMismatch,
    ErrorCode::NonFinitePoint,    ErrorCode::UnknownCluster,  ErrorCode::UnknownTerm,
    ErrorCode::EmptySelection,    ErrorCode::EmptyKeyword,    ErrorCode::NoOccurrences,
    ErrorCode::UnknownRecord,     ErrorCode::VersionMismatch, ErrorCode::PipelineFailure,
    ErrorCode::InvalidInput,      ErrorCode::UnknownSession,  ErrorCode::CorpusNotLoaded,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `detail()` names the offending
/// object (a file, an id, a manifest line, a pipeline stage).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pm
