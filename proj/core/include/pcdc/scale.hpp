#ifndef PCDC_SCALE_HPP_
#define PCDC_SCALE_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcdc/config.hpp"
#include "pcdc/geometry.hpp"
#include "pcdc/nn/layers.hpp"
#include "pcdc/point_cloud.hpp"

namespace pcdc {

// Parent/child bookkeeping for one 2x voxel pooling step. Children must be
// Morton sorted, which makes every parent's children contiguous.
struct OctantPooling {
  std::vector<Coord> parents;
  std::shared_ptr<std::vector<std::uint32_t>> parent_of_child;
  std::shared_ptr<std::vector<std::uint8_t>> slot;
  std::vector<std::uint8_t> mask;

  std::size_t child_count() const { return slot->size(); }
};

OctantPooling pool_octants(std::span<const Coord> children);

// Occupancy masks as a P x 8 tensor of 0/1 bits (column = child slot).
nn::Tensor mask_bits(std::span<const std::uint8_t> masks);

// Occupancy of the 26 face/edge/corner neighbors of every coordinate, one
// 0/1 column per neighbor offset (dx, dy, dz in -1..1, center skipped, x
// slowest). Coordinates must be Morton sorted.
nn::Tensor neighbor_occupancy(std::span<const Coord> coords);
inline constexpr std::size_t kNeighborBits = 26;

enum class OutputAct { kNone, kRelu, kLayerNorm };

// Child features laid out per slot (8 x C, zero for empty slots) plus the 8
// occupancy bits, mapped through a small MLP. This is the dense equivalent of
// a stride-2 2x2x2 convolution.
struct DownsampleBlock {
  nn::Mlp mlp;
  OutputAct act = OutputAct::kRelu;

  std::size_t in_width() const { return (mlp.in_width() - 8) / 8; }
  std::size_t out_width() const { return mlp.out_width(); }
  nn::Var forward(nn::Graph& g, const OctantPooling& pool, nn::Var child_feats) const;

  template <typename F>
  void for_each_param(F&& f) {
    mlp.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    mlp.for_each_param(f);
  }
};

DownsampleBlock make_downsample(const std::string& name, std::size_t c_in, std::size_t c_out,
                                OutputAct act, const CodecConfig& cfg);

// Evaluates one block outside any training graph.
ScaleLevel downsample(const DownsampleBlock& block, const ScaleLevel& level);

// Both maps see the coarse feature concatenated with the 26 neighbor
// occupancy bits of the coarse point, which stands in for the spatial
// support of a sparse convolution.
struct UpsampleBlock {
  nn::Mlp occupancy;       // C_in + 26 -> 8 logits
  nn::LinearLayer child;   // C_in + 26 -> 8 * C_out, one block per slot

  std::size_t in_width() const { return occupancy.in_width() - kNeighborBits; }
  std::size_t out_width() const { return child.out_width() / 8; }

  template <typename F>
  void for_each_param(F&& f) {
    occupancy.for_each_param(f);
    child.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    occupancy.for_each_param(f);
    child.for_each_param(f);
  }
};

UpsampleBlock make_upsample(const std::string& name, std::size_t c_in, std::size_t c_out,
                            const CodecConfig& cfg);

struct UpsampleOutput {
  std::vector<Coord> coords;  // kept children, Morton sorted
  nn::Var feats;              // one row per kept child
  nn::Var probs;              // parents x 8 occupancy probabilities
};

// Predicts child occupancy of every parent and keeps the target_count most
// likely children (ties go to the smaller Morton key). When `teacher` is
// given, those children are kept instead; they must all be children of
// `parents`. Throws kInsufficientCandidates when target_count > 8 * parents.
UpsampleOutput upsample_forward(nn::Graph& g, const UpsampleBlock& block,
                                std::span<const Coord> parents, nn::Var parent_feats,
                                std::size_t target_count,
                                std::span<const Coord> teacher = {});

struct UpsampleResult {
  ScaleLevel level;
  nn::Tensor probs;
};

UpsampleResult upsample(const UpsampleBlock& block, const ScaleLevel& level,
                        std::size_t target_count);

// Ground-truth occupancy of each parent's 8 children, as 0/1 targets.
// Parents must be Morton sorted; children of absent parents are ignored.
nn::Tensor occupancy_targets(std::span<const Coord> parents, std::span<const Coord> children);

}  // namespace pcdc

#endif  // PCDC_SCALE_HPP_
