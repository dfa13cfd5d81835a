#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sahnet {

/// Error codes raised across the toolkit. The CLI maps each one onto an
/// exit-code class via error_class().
enum class Errc {
  // volio
  BadMagic,
  UnsupportedFormat,
  UnsupportedDatatype,
  BadHeader,
  Truncated,
  NonFinite,
  SingularAffine,
  InvariantViolation,
  // prep
  EmptyMask,
  DegenerateInput,
  // tensor / net
  ShapeMismatch,
  RankUnsupported,
  BatchTooSmall,
  DisconnectedGraph,
  ConfigInvalid,
  MetadataMissing,
  AlreadyFused,
  SpatialTooSmall,
  // train
  MissingClass,
  EmptyClass,
  UnknownMonitor,
  ManifestCorrupt,
  BlobLengthMismatch,
  UnknownTensorName,
  // explain
  UnknownLayer,
  NotConvolutional,
  // eval
  LengthMismatch,
  UnknownClass,
  SingleClass,
  DegenerateMargin,
  TooSmall,
  ZeroVariance,
  UndefinedPropagation,
  // cli
  IoFailure,
  Usage,
};

enum class ErrorClass { Usage, Data, Numeric };

std::string_view to_string(Errc code) noexcept;
ErrorClass error_class(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Error(Errc code, std::string stage, const std::string& message)
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  Errc code() const noexcept { return code_; }
  /// Pipeline stage that raised the error, empty when not staged.
  const std::string& stage() const noexcept { return stage_; }

 private:
  Errc code_;
  std::string stage_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace sahnet
