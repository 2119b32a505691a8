#ifndef PCDC_KNN_HPP_
#define PCDC_KNN_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "pcdc/geometry.hpp"

namespace pcdc {

// Fixed N x K neighbor table from anchors into a reference set. Row i lists
// reference indices by increasing distance, ties broken by the neighbor's
// Morton key; offsets are anchor - neighbor in voxel units.
struct KnnAdjacency {
  std::size_t anchor_count = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> neighbor_idx;
  std::vector<Coord> rel_offsets;

  std::uint32_t index(std::size_t i, std::size_t j) const { return neighbor_idx[i * k + j]; }
  const Coord& offset(std::size_t i, std::size_t j) const { return rel_offsets[i * k + j]; }
  std::uint64_t checksum() const;
};

// Exact k nearest neighbors. Uses a uniform grid over the reference
// coordinates and a plain scan below 256 references. When there are fewer
// than k references the farthest one is repeated.
KnnAdjacency build_knn(std::span<const Coord> anchors, std::span<const Coord> refs, std::size_t k);

}  // namespace pcdc

#endif  // PCDC_KNN_HPP_
