#ifndef PCDC_CONTAINER_HPP_
#define PCDC_CONTAINER_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcdc/config.hpp"
#include "pcdc/pipeline.hpp"
#include "pcdc/ra_schedule.hpp"

namespace pcdc {

inline constexpr std::array<std::uint8_t, 5> kMagic = {'P', 'C', 'D', 'C', 0x01};
inline constexpr std::uint8_t kFormatVersion = 1;

enum class SectionTag : std::uint8_t {
  kC3Octree = 1,
  kC4Octree = 2,
  kF4Range = 3,
  kZFactorized = 4,
};

// magic + version .. weights hash
inline constexpr std::size_t kFixedHeaderBytes = 29;
// index, kind, N, three target counts, four (tag, length) entries
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 4 + 12 + 4 * 5;

struct StreamHeader {
  std::uint8_t version = kFormatVersion;
  std::uint8_t gof_size = 16;
  std::uint8_t bit_depth = 10;
  std::uint8_t lambda_index = 0;
  std::uint32_t frame_count = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t weights_hash = 0;
  std::vector<GofPlan> plans;
};

// Frames are stored in coding order.
struct Stream {
  StreamHeader header;
  std::vector<FramePayload> frames;
};

// GOF plans covering `frame_count` frames; the last one may be truncated.
std::vector<GofPlan> sequence_plans(int frame_count, int gof_size);

StreamHeader make_header(const CodecConfig& cfg, std::uint64_t weights_hash, int frame_count);

std::vector<std::uint8_t> mux(const Stream& s);
// Structural parse. Truncation, bad magic, unknown version, bad section
// tags and plans that disagree with the header are DecodeErrors with the
// offending byte offset.
Stream demux(std::span<const std::uint8_t> bytes);

// Size of one frame record in the file.
std::size_t frame_record_bytes(const FramePayload& p);

// Throws kHashMismatch when the stream was produced with another model or
// configuration.
void check_compatible(const StreamHeader& h, const CodecConfig& cfg, std::uint64_t weights_hash);

// Applies the header fields that shape decoding (gof size, bit depth,
// lambda) to `cfg`.
CodecConfig config_for_stream(const StreamHeader& h, CodecConfig cfg);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace pcdc

#endif  // PCDC_CONTAINER_HPP_
