#include "pcdc/error.hpp"

namespace pcdc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyCloud: return "EmptyCloud";
    case ErrorCode::kCoordOutOfRange: return "CoordOutOfRange";
    case ErrorCode::kInsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kAdjacencyMismatch: return "AdjacencyMismatch";
    case ErrorCode::kScanOrderError: return "ScanOrderError";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kDuplicatePoints: return "DuplicatePoints";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSchedulingError: return "SchedulingError";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kHashMismatch: return "HashMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(compose(code, message)), code_(code) {}

Error::Error(ErrorCode code, const std::string& message, std::size_t byte_offset)
    : std::runtime_error(compose(code, message + " (at byte " +
                                           std::to_string(byte_offset) + ")")),
      code_(code),
      offset_(byte_offset) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

void fail_decode(std::size_t byte_offset, const std::string& message) {
  throw Error(ErrorCode::kDecodeError, message, byte_offset);
}

}  // namespace pcdc
