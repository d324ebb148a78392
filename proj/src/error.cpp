#include "fovea/error.hpp"

namespace fovea {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingHeader: return "MissingHeader";
    case ErrorCode::kEmptyTrack: return "EmptyTrack";
    case ErrorCode::kCropLargerThanFrame: return "CropLargerThanFrame";
    case ErrorCode::kMissingFrameFile: return "MissingFrameFile";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kUpscaleRequested: return "UpscaleRequested";
    case ErrorCode::kNonDivisiblePatch: return "NonDivisiblePatch";
    case ErrorCode::kSpecMisaligned: return "SpecMisaligned";
    case ErrorCode::kScoreNotFound: return "ScoreNotFound";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kEmptyReply: return "EmptyReply";
    case ErrorCode::kProviderFailure: return "ProviderFailure";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kAllBackendsFailed: return "AllBackendsFailed";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kInsufficientConditions: return "InsufficientConditions";
    case ErrorCode::kUnknownTask: return "UnknownTask";
    case ErrorCode::kUnknownCandidate: return "UnknownCandidate";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kScoreOutOfRange: return "ScoreOutOfRange";
  }
  return "Unknown";
}

}  // namespace fovea
