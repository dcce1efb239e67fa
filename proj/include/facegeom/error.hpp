// Error taxonomy shared by the whole library. Every failure the pipeline can
// produce carries one of these codes so callers (and the CLI) can map it to
// an exit status without string matching.
#pragma once

#include <stdexcept>
#include <string>

namespace facegeom {

enum class ErrorCode {
  ValidationError,      // bad argument / config / input contract violation
  IoError,              // file missing, short read, unsupported encoding
  MalformedHeader,      // unparseable PFM/PGM/PLY/OBJ header
  DimensionMismatch,    // rasters or arrays of inconsistent shape
  MaskChannelConflict,  // explicit mask claims validity where channels are NaN
  NoValidPixels,        // mask selects nothing usable
  TooFewPixels,         // not enough samples for the requested estimate
  EmptyFace,            // lifted grid produced no triangles
  DegenerateTriangle,   // face area below the degeneracy threshold
  ZeroLengthEdge,       // coincident neighbor vertices where a direction is needed
  TooFewPairs,          // correspondence set smaller than the minimal sample
  DegenerateSample,     // every RANSAC draw was rank-deficient
  EmptyPairSet,         // energy/step requested with no pairs at all
  NoActivePairs,        // pruning removed every correspondence
  SingularSystem,       // factorization failed
  NotConverged,         // solve finished but the residual check failed
};

const char* error_code_name(ErrorCode code);

// True for failures of the numeric stages (factorization / residual), which
// the CLI reports with a distinct exit status from input validation.
bool is_solver_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace facegeom
