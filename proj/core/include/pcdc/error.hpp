#ifndef PCDC_ERROR_HPP_
#define PCDC_ERROR_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pcdc {

enum class ErrorCode {
  kEmptyCloud,
  kCoordOutOfRange,
  kInsufficientCandidates,
  kEmptyReference,
  kShapeMismatch,
  kNonFinite,
  kAdjacencyMismatch,
  kScanOrderError,
  kDecodeError,
  kDuplicatePoints,
  kInvalidArgument,
  kSchedulingError,
  kTrainingDiverged,
  kNoOverlap,
  kHashMismatch,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported through this exception type; the
// code is the machine-readable part, what() the human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, std::size_t byte_offset);

  ErrorCode code() const noexcept { return code_; }
  // Set for kDecodeError raised while parsing a byte stream.
  std::optional<std::size_t> byte_offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> offset_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);
[[noreturn]] void fail_decode(std::size_t byte_offset, const std::string& message);

}  // namespace pcdc

#endif  // PCDC_ERROR_HPP_
