#ifndef PCDC_POINT_CLOUD_HPP_
#define PCDC_POINT_CLOUD_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pcdc/geometry.hpp"
#include "pcdc/nn/tensor.hpp"

namespace pcdc {

// Voxelized geometry of one frame. Coordinates are unique and Morton sorted;
// feats has one row per coordinate.
struct FramePointCloud {
  std::uint32_t frame_index = 0;
  std::vector<Coord> coords;
  nn::Tensor feats;

  std::size_t size() const { return coords.size(); }
};

// One level of the scale pyramid. Stage-k coordinates are stage-0
// coordinates floor-divided by 2^k.
struct ScaleLevel {
  int stage = 0;
  std::vector<Coord> coords;
  nn::Tensor feats;

  std::size_t size() const { return coords.size(); }
  int scale() const { return 1 << stage; }
};

// Rounds to the integer grid (half away from zero), saturates into
// [0, 2^bit_depth), merges duplicates and records the merge count as the
// single feature column. Output is Morton sorted.
FramePointCloud voxelize(std::span<const std::array<double, 3>> points, int bit_depth,
                         std::uint32_t frame_index = 0);

// Wraps already-voxelized unique coordinates with a unit occupancy feature.
// Sorts into Morton order; throws kDuplicatePoints on repeats.
FramePointCloud make_frame(std::vector<Coord> coords, std::uint32_t frame_index = 0);

ScaleLevel as_level(const FramePointCloud& frame);

// Sorted unique floor(c / 2) of the input.
std::vector<Coord> coarsen(std::span<const Coord> coords);

}  // namespace pcdc

#endif  // PCDC_POINT_CLOUD_HPP_
