#include "pcdc/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc {

FramePointCloud voxelize(std::span<const std::array<double, 3>> points, int bit_depth,
                         std::uint32_t frame_index) {
  if (points.empty()) fail(ErrorCode::kEmptyCloud, "voxelize: no input points");
  if (bit_depth < 1 || bit_depth > kMortonBitsPerAxis) {
    fail(ErrorCode::kInvalidArgument, "voxelize: bit depth " + std::to_string(bit_depth));
  }
  const double hi = static_cast<double>((1 << bit_depth) - 1);
  std::vector<std::pair<std::uint64_t, Coord>> keyed;
  keyed.reserve(points.size());
  for (const auto& p : points) {
    std::int32_t v[3];
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(p[a])) fail(ErrorCode::kNonFinite, "voxelize: non-finite coordinate");
      v[a] = static_cast<std::int32_t>(std::clamp(std::round(p[a]), 0.0, hi));
    }
    const Coord c{v[0], v[1], v[2]};
    keyed.emplace_back(morton_key(c), c);
  }
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  FramePointCloud out;
  out.frame_index = frame_index;
  std::vector<double> counts;
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t j = i;
    while (j < keyed.size() && keyed[j].first == keyed[i].first) ++j;
    out.coords.push_back(keyed[i].second);
    counts.push_back(static_cast<double>(j - i));
    i = j;
  }
  out.feats = nn::Tensor(out.coords.size(), 1, std::move(counts));
  return out;
}

FramePointCloud make_frame(std::vector<Coord> coords, std::uint32_t frame_index) {
  sort_morton(coords);
  for (std::size_t i = 1; i < coords.size(); ++i) {
    if (coords[i] == coords[i - 1]) {
      fail(ErrorCode::kDuplicatePoints, "make_frame: duplicate coordinate");
    }
  }
  FramePointCloud out;
  out.frame_index = frame_index;
  out.feats = nn::Tensor(coords.size(), 1, 1.0);
  out.coords = std::move(coords);
  return out;
}

ScaleLevel as_level(const FramePointCloud& frame) {
  return ScaleLevel{0, frame.coords, frame.feats};
}

std::vector<Coord> coarsen(std::span<const Coord> coords) {
  std::vector<Coord> out;
  out.reserve(coords.size());
  for (const Coord& c : coords) out.push_back(parent_of(c));
  sort_morton(out);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace pcdc
