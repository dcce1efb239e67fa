#include "facegeom/error.hpp"

namespace facegeom {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MaskChannelConflict: return "MaskChannelConflict";
    case ErrorCode::NoValidPixels: return "NoValidPixels";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::EmptyFace: return "EmptyFace";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::ZeroLengthEdge: return "ZeroLengthEdge";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::EmptyPairSet: return "EmptyPairSet";
    case ErrorCode::NoActivePairs: return "NoActivePairs";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NotConverged: return "NotConverged";
  }
  return "UnknownError";
}

bool is_solver_error(ErrorCode code) {
  return code == ErrorCode::SingularSystem || code == ErrorCode::NotConverged;
}

}  // namespace facegeom
