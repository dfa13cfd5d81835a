#include "sahnet/error.hpp"

namespace sahnet {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
    case Errc::BadHeader: return "BadHeader";
    case Errc::Truncated: return "Truncated";
    case Errc::NonFinite: return "NonFinite";
    case Errc::SingularAffine: return "SingularAffine";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::RankUnsupported: return "RankUnsupported";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MetadataMissing: return "MetadataMissing";
    case Errc::AlreadyFused: return "AlreadyFused";
    case Errc::SpatialTooSmall: return "SpatialTooSmall";
    case Errc::MissingClass: return "MissingClass";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::UnknownMonitor: return "UnknownMonitor";
    case Errc::ManifestCorrupt: return "ManifestCorrupt";
    case Errc::BlobLengthMismatch: return "BlobLengthMismatch";
    case Errc::UnknownTensorName: return "UnknownTensorName";
    case Errc::UnknownLayer: return "UnknownLayer";
    case Errc::NotConvolutional: return "NotConvolutional";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::SingleClass: return "SingleClass";
    case Errc::DegenerateMargin: return "DegenerateMargin";
    case Errc::TooSmall: return "TooSmall";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::UndefinedPropagation: return "UndefinedPropagation";
    case Errc::IoFailure: return "IoFailure";
    case Errc::Usage: return "Usage";
  }
  return "Unknown";
}

ErrorClass error_class(Errc code) noexcept {
  switch (code) {
    case Errc::Usage:
    case Errc::ConfigInvalid:
    case Errc::UnknownMonitor:
    case Errc::UnknownLayer:
    case Errc::NotConvolutional:
      return ErrorClass::Usage;
    case Errc::SingularAffine:
    case Errc::DegenerateInput:
    case Errc::DisconnectedGraph:
    case Errc::ZeroVariance:
    case Errc::DegenerateMargin:
    case Errc::UndefinedPropagation:
      return ErrorClass::Numeric;
    default:
      return ErrorClass::Data;
  }
}

}  // namespace sahnet
