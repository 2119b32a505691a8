#ifndef PCDC_GEOM_CODEC_HPP_
#define PCDC_GEOM_CODEC_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "pcdc/geometry.hpp"

namespace pcdc {

// Lossless breadth-first octree coder. Payload: {u8 depth, varint point
// count, context tables, range-coded occupancy masks}. Masks are coded with
// frozen per-context tables gathered in a counting pass; the context is the
// level group (upper levels / second to last / last) and the popcount of the
// parent's mask.
std::vector<std::uint8_t> encode_coords(std::span<const Coord> coords, int depth);
// Returns the coordinates in Morton order. `base_offset` shifts reported
// DecodeError offsets.
std::vector<Coord> decode_coords(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0);

// One extra octree level below a known, Morton sorted parent set: codes
// which children of each parent are occupied. Every parent must have at
// least one child.
std::vector<std::uint8_t> encode_refinement(std::span<const Coord> parents,
                                            std::span<const Coord> children);
std::vector<Coord> decode_refinement(std::span<const Coord> parents,
                                     std::span<const std::uint8_t> bytes,
                                     std::size_t base_offset = 0);

// Number of occupancy masks the octree emits per level (root first).
std::vector<std::size_t> octree_mask_counts(std::span<const Coord> coords, int depth);

}  // namespace pcdc

#endif  // PCDC_GEOM_CODEC_HPP_
