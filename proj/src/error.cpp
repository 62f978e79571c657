#include "pm/error.hpp"

namespace pm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::BackendTimeout: return "BackendTimeout";
    case ErrorCode::UndecodableImage: return "UndecodableImage";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::PartialFailure: return "PartialFailure";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinitePoint: return "NonFinitePoint";
    case ErrorCode::UnknownCluster: return "UnknownCluster";
    case ErrorCode::UnknownTerm: return "UnknownTerm";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyKeyword: return "EmptyKeyword";
    case ErrorCode::NoOccurrences: return "NoOccurrences";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::PipelineFailure: return "PipelineFailure";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::CorpusNotLoaded: return "CorpusNotLoaded";
  }
  return "Unknown";
}

namespace {
std::string describe(ErrorCode code, const std::string& detail) {
  std::string out(to_string(code));
  out.append(": ").append(detail);
  return out;
}
}  // namespace

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(describe(code, detail)),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace pm
