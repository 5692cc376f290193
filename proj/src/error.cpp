#include "scnn/error.hpp"

namespace scnn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kOutOfBounds: return "index out of bounds";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kAccumulatorOverflow: return "accumulator overflow";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kBadVersion: return "unsupported version";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kDimensionOverflow: return "dimension overflow";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kMalformed: return "malformed file";
    case ErrorCode::kMalformedManifest: return "malformed manifest";
    case ErrorCode::kDimensionInconsistency: return "dimension inconsistency";
    case ErrorCode::kUnknownLayerKind: return "unknown layer kind";
    case ErrorCode::kMissingField: return "missing field";
    case ErrorCode::kUnknownPreset: return "unknown preset";
    case ErrorCode::kUnknownMode: return "unknown mode";
    case ErrorCode::kCalibration: return "calibration error";
    case ErrorCode::kIo: return "i/o error";
  }
  return "error";
}

}  // namespace scnn
