#ifndef PCDC_GEOMETRY_HPP_
#define PCDC_GEOMETRY_HPP_

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace pcdc {

// Integer voxel coordinate.
struct Coord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend auto operator<=>(const Coord&, const Coord&) = default;
};

inline constexpr int kMortonBitsPerAxis = 21;

// Bit-interleaved z-order key. Within each bit triple x is the most
// significant, then y, then z. Throws kCoordOutOfRange for components outside
// [0, 2^21).
std::uint64_t morton_key(const Coord& c);

// Octant index of `c` inside its parent cell: (x&1)<<2 | (y&1)<<1 | (z&1).
// Matches the z-order of the eight children.
inline int child_slot(const Coord& c) {
  return ((c.x & 1) << 2) | ((c.y & 1) << 1) | (c.z & 1);
}

inline Coord parent_of(const Coord& c) { return {c.x >> 1, c.y >> 1, c.z >> 1}; }

inline Coord child_of(const Coord& parent, int slot) {
  return {(parent.x << 1) | ((slot >> 2) & 1), (parent.y << 1) | ((slot >> 1) & 1),
          (parent.z << 1) | (slot & 1)};
}

inline std::int64_t squared_distance(const Coord& a, const Coord& b) {
  const std::int64_t dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Sorts in place by Morton key. Keys must be unique for a well defined result.
void sort_morton(std::vector<Coord>& coords);
bool is_morton_sorted(std::span<const Coord> coords);

// Permutation that sorts `coords` by Morton key (stable).
std::vector<std::uint32_t> morton_order(std::span<const Coord> coords);

// FNV-1a over the raw little-endian coordinate triples.
std::uint64_t checksum(std::span<const Coord> coords);

}  // namespace pcdc

#endif  // PCDC_GEOMETRY_HPP_
