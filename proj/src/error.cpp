#include "mulaaip/error.hpp"

namespace mulaaip {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoAtoms: return "NoAtoms";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MissingAnchor: return "MissingAnchor";
    case ErrorCode::EmptyRecord: return "EmptyRecord";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::CoincidentAnchors: return "CoincidentAnchors";
    case ErrorCode::DegenerateDihedral: return "DegenerateDihedral";
    case ErrorCode::OutOfCutoff: return "OutOfCutoff";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::MissingModality: return "MissingModality";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::NonPositiveKd: return "NonPositiveKd";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
      return ErrorCategory::Config;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFinite:
    case ErrorCode::NotScalar:
      return ErrorCategory::Internal;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace mulaaip
