#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mulaaip {

enum class ErrorCode {
  // structure_io
  NoAtoms,
  MalformedRecord,
  MissingAnchor,
  EmptyRecord,
  // geometry
  DegenerateFrame,
  CoincidentAnchors,
  DegenerateDihedral,
  // basis
  OutOfCutoff,
  // graphs
  EmptyGraph,
  ZeroVector,
  BadMagic,
  VersionMismatch,
  TruncatedRecord,
  DuplicateId,
  DimMismatch,
  // autodiff / layers
  ShapeMismatch,
  NonFinite,
  NotScalar,
  // model / training
  MissingModality,
  LengthMismatch,
  EmptySplit,
  // data
  NonPositiveKd,
  TooFewRecords,
  BadManifest,
  // cli
  ConfigError,
  MissingCheckpoint,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Broad class of a failure, used by the CLI to pick an exit status.
enum class ErrorCategory { Config, Data, Internal };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace mulaaip
