#ifndef PCDC_PIPELINE_HPP_
#define PCDC_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "pcdc/config.hpp"
#include "pcdc/model.hpp"
#include "pcdc/point_cloud.hpp"
#include "pcdc/ra_schedule.hpp"

namespace pcdc {

// Coded form of one frame. Sections: stage-3 coordinates as one refinement
// level below stage 4, stage-4 octree, range-coded latent, hyper latent.
struct FramePayload {
  std::uint32_t frame_index = 0;
  FrameKind kind = FrameKind::kI;
  std::uint32_t point_count = 0;
  // Points at stages 2, 1 and 0: how many children each upsample keeps.
  std::array<std::uint32_t, 3> target_counts{};
  std::vector<std::uint8_t> c3;
  std::vector<std::uint8_t> c4;
  std::vector<std::uint8_t> f4;
  std::vector<std::uint8_t> z;

  std::size_t section_bytes() const { return c3.size() + c4.size() + f4.size() + z.size(); }
};

// Decoded references of a frame. P-frames use `past`; B-frames both.
struct ReferenceSet {
  const FramePointCloud* past = nullptr;
  const FramePointCloud* future = nullptr;
};

struct CodecOptions {
  // Ablation: replace the motion-aware context by zeros on both sides.
  bool zero_context = false;
};

// Stage-3 feature snapshots for residual analysis.
struct FeatureDiagnostics {
  std::vector<Coord> c3;
  nn::Tensor truth;         // encoder features of the current frame
  nn::Tensor aligned;       // decoder output before refinement
  nn::Tensor refined;       // after cross-attention refinement
  nn::Tensor interpolated;  // nearest past-reference feature per point
  std::uint64_t context_checksum = 0;
  std::uint64_t adjacency_checksum = 0;
};

struct EncodeResult {
  FramePayload payload;
  double estimate_f4_bits = 0.0;
  double estimate_z_bits = 0.0;
  // Closed loop: produced by running decode_frame on `payload`.
  FramePointCloud reconstruction;
  FeatureDiagnostics diagnostics;
};

// Throws kSchedulingError when the references required by `kind` are
// missing.
EncodeResult encode_frame(const FramePointCloud& cur, FrameKind kind, const ReferenceSet& refs,
                          const CodecConfig& cfg, const CodecWeights& w,
                          const CodecOptions& opts = {});

FramePointCloud decode_frame(const FramePayload& payload, const ReferenceSet& refs,
                             const CodecConfig& cfg, const CodecWeights& w,
                             const CodecOptions& opts = {}, FeatureDiagnostics* diag = nullptr);

// Differentiable pass over one frame with ground-truth geometry used as the
// upsampling teacher.
struct ForwardOptions {
  bool training = true;   // additive noise instead of rounding
  bool zero_context = false;
  std::mt19937_64* rng = nullptr;
};

struct FrameTerms {
  nn::Var rate_bits;  // latent + hyper latent, in bits
  std::array<nn::Var, 3> probs;
  std::array<std::shared_ptr<const nn::Tensor>, 3> targets;
  nn::Var truth3;
  nn::Var aligned3;
  nn::Var refined3;
  std::size_t point_count = 0;
};

FrameTerms forward_frame(nn::Graph& g, const FramePointCloud& cur, FrameKind kind,
                         const ReferenceSet& refs, const CodecConfig& cfg, const CodecWeights& w,
                         const ForwardOptions& opts);

// D = mean over stages of the mean binary cross-entropy (natural log,
// probabilities clamped to [1e-7, 1 - 1e-7]).
nn::Var distortion(nn::Graph& g, std::span<const nn::Var> probs,
                   std::span<const std::shared_ptr<const nn::Tensor>> targets);

// R + lambda * D, with R in bits per input point.
nn::Var rd_loss(nn::Graph& g, nn::Var rate_bits, std::size_t point_count,
                std::span<const nn::Var> probs,
                std::span<const std::shared_ptr<const nn::Tensor>> targets, double lambda);

inline constexpr double kBceClamp = 1e-7;

}  // namespace pcdc

#endif  // PCDC_PIPELINE_HPP_
