#ifndef PCDC_SEQUENCE_HPP_
#define PCDC_SEQUENCE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "pcdc/container.hpp"
#include "pcdc/pipeline.hpp"

namespace pcdc {

struct SequenceOptions {
  bool zero_context = false;
  // Worker threads per stage; 0 reads PCDC_THREADS, then the core count.
  int threads = 0;
};

int resolve_threads(int requested);

// Per coded frame, in coding order.
struct FrameReport {
  std::uint32_t frame_index = 0;
  FrameKind kind = FrameKind::kI;
  int layer = 0;
  std::size_t points = 0;
  std::size_t c3_bytes = 0, c4_bytes = 0, f4_bytes = 0, z_bytes = 0;
  std::size_t record_bytes = 0;
  double estimate_f4_bits = 0.0;
  double estimate_z_bits = 0.0;
  std::uint64_t reconstruction_checksum = 0;
  FeatureDiagnostics diagnostics;
};

struct EncodedSequence {
  Stream stream;
  std::vector<std::uint8_t> bytes;
  std::vector<FrameReport> reports;
  // Display order; these are the references the encoder used.
  std::vector<FramePointCloud> reconstructions;
};

std::uint64_t frame_checksum(const FramePointCloud& f);

// Closed-loop encode: each frame's references are the decoder outputs of
// earlier frames. Frames must be indexed 0..n-1 in order.
EncodedSequence encode_sequence(std::span<const FramePointCloud> frames, const CodecConfig& cfg,
                                const CodecWeights& w, const SequenceOptions& opts = {});

// Decodes every frame; output is in display order. Checks the stream's
// hashes against cfg and w first.
std::vector<FramePointCloud> decode_sequence(const Stream& s, const CodecConfig& cfg,
                                             const CodecWeights& w,
                                             const SequenceOptions& opts = {});

}  // namespace pcdc

#endif  // PCDC_SEQUENCE_HPP_
