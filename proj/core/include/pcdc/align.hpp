#ifndef PCDC_ALIGN_HPP_
#define PCDC_ALIGN_HPP_

#include <span>
#include <string>

#include "pcdc/config.hpp"
#include "pcdc/geometry.hpp"
#include "pcdc/knn.hpp"
#include "pcdc/nn/layers.hpp"

namespace pcdc {

struct AlignParams {
  nn::Mlp mask;  // C + 3 -> 1 logit per neighbor
  nn::Mlp pred;  // C + 3 -> C

  std::size_t width() const { return pred.out_width(); }

  template <typename F>
  void for_each_param(F&& f) {
    mask.for_each_param(f);
    pred.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    mask.for_each_param(f);
    pred.for_each_param(f);
  }
};

AlignParams make_align(const std::string& name, std::size_t width, const CodecConfig& cfg);

struct AlignedFeatures {
  nn::Var feats;      // N x C
  nn::Var soft_mask;  // (N * K) x 1, rows of one anchor are consecutive
};

// Feature-space motion alignment over a fixed adjacency: neighbor features
// are soft-masked from (feature, offset) pairs, summed over the K
// neighbors, joined with the anchor coordinate divided by `coord_extent`,
// and mapped to the prediction. Throws kAdjacencyMismatch when `adj` was not
// built from (anchors, refs).
AlignedFeatures fmt_align(nn::Graph& g, const AlignParams& p, std::span<const Coord> anchors,
                          std::span<const Coord> refs, nn::Var ref_feats,
                          const KnnAdjacency& adj, double coord_extent);

// Per-anchor descriptor both codec sides can rebuild from decoded
// coordinates: normalized position and 26 neighbor occupancy bits.
nn::Tensor anchor_descriptor(std::span<const Coord> coords, double coord_extent);
inline constexpr std::size_t kDescriptorWidth = 29;

struct FuseParams {
  nn::LinearLayer gate;  // descriptor -> C
  nn::LinearLayer ctx;   // descriptor + C -> context width

  template <typename F>
  void for_each_param(F&& f) {
    gate.for_each_param(f);
    ctx.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    gate.for_each_param(f);
    ctx.for_each_param(f);
  }
};

FuseParams make_fuse(const std::string& name, std::size_t desc_width, std::size_t width,
                     std::size_t ctx_width, const CodecConfig& cfg);

struct FusedContext {
  nn::Var feats;       // N x context width
  nn::Var fwd_weight;  // N x C, the forward gate
};

// Gated bidirectional fusion: w = sigmoid(gate(desc)), the backward weight
// is 1 - w, and the context is ctx(desc ++ (w * fwd) * ((1 - w) * bwd)).
FusedContext bi_fuse(nn::Graph& g, const FuseParams& p, nn::Var desc, nn::Var fwd, nn::Var bwd);

// Single reference: the gate is bypassed (w = 1) and the backward factor is
// the multiplicative identity, so the context is ctx(desc ++ fwd).
FusedContext single_ref_context(nn::Graph& g, const FuseParams& p, nn::Var desc, nn::Var fwd);

// The shared tail of both: ctx(desc ++ fwd_term * bwd_term).
nn::Var fuse_terms(nn::Graph& g, const FuseParams& p, nn::Var desc, nn::Var fwd_term,
                   nn::Var bwd_term);

}  // namespace pcdc

#endif  // PCDC_ALIGN_HPP_
