#include "pcdc/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/hash.hpp"

namespace pcdc {

namespace {

// Spreads the low 21 bits of v so that bit i lands at bit 3i.
std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | v << 32) & 0x1f00000000ffffULL;
  v = (v | v << 16) & 0x1f0000ff0000ffULL;
  v = (v | v << 8) & 0x100f00f00f00f00fULL;
  v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
  v = (v | v << 2) & 0x1249249249249249ULL;
  return v;
}

void check_component(std::int32_t v) {
  if (v < 0 || v >= (std::int32_t{1} << kMortonBitsPerAxis)) {
    fail(ErrorCode::kCoordOutOfRange,
         "coordinate component " + std::to_string(v) + " outside [0, 2^21)");
  }
}

}  // namespace

std::uint64_t morton_key(const Coord& c) {
  check_component(c.x);
  check_component(c.y);
  check_component(c.z);
  return spread_bits(static_cast<std::uint64_t>(c.x)) << 2 |
         spread_bits(static_cast<std::uint64_t>(c.y)) << 1 |
         spread_bits(static_cast<std::uint64_t>(c.z));
}

std::vector<std::uint32_t> morton_order(std::span<const Coord> coords) {
  std::vector<std::uint64_t> keys(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) keys[i] = morton_key(coords[i]);
  std::vector<std::uint32_t> perm(coords.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
  return perm;
}

void sort_morton(std::vector<Coord>& coords) {
  const auto perm = morton_order(coords);
  std::vector<Coord> sorted(coords.size());
  for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = coords[perm[i]];
  coords = std::move(sorted);
}

bool is_morton_sorted(std::span<const Coord> coords) {
  for (std::size_t i = 1; i < coords.size(); ++i) {
    if (morton_key(coords[i - 1]) >= morton_key(coords[i])) return false;
  }
  return true;
}

std::uint64_t checksum(std::span<const Coord> coords) {
  Fnv1a h;
  for (const Coord& c : coords) {
    for (std::int32_t v : {c.x, c.y, c.z}) {
      const auto u = static_cast<std::uint32_t>(v);
      const std::uint8_t b[4] = {static_cast<std::uint8_t>(u), static_cast<std::uint8_t>(u >> 8),
                                 static_cast<std::uint8_t>(u >> 16),
                                 static_cast<std::uint8_t>(u >> 24)};
      h.update(b);
    }
  }
  return h.digest();
}

}  // namespace pcdc
