#include "pcdc/knn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "pcdc/error.hpp"
#include "pcdc/hash.hpp"

namespace pcdc {

namespace {

constexpr std::size_t kFullScanBelow = 256;

struct Candidate {
  std::int64_t d2;
  std::uint64_t key;
  std::uint32_t idx;

  bool operator<(const Candidate& o) const {
    return d2 != o.d2 ? d2 < o.d2 : key < o.key;
  }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Reference points bucketed by cell, CSR layout.
class Grid {
 public:
  Grid(std::span<const Coord> refs) {
    lo_ = hi_ = refs[0];
    for (const Coord& c : refs) {
      lo_ = {std::min(lo_.x, c.x), std::min(lo_.y, c.y), std::min(lo_.z, c.z)};
      hi_ = {std::max(hi_.x, c.x), std::max(hi_.y, c.y), std::max(hi_.z, c.z)};
    }
    const double ex = hi_.x - lo_.x + 1.0, ey = hi_.y - lo_.y + 1.0, ez = hi_.z - lo_.z + 1.0;
    // Aim for a few points per cell on surface-like data, where occupancy
    // grows with area rather than volume.
    const double area = ex * ey + ey * ez + ex * ez;
    cell_ = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::sqrt(4.0 * area / static_cast<double>(refs.size()))));
    for (int a = 0; a < 3; ++a) {
      const std::int64_t extent = (a == 0 ? hi_.x - lo_.x : a == 1 ? hi_.y - lo_.y : hi_.z - lo_.z);
      dims_[a] = extent / cell_ + 1;
    }
    start_.assign(static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]) + 1, 0);
    for (const Coord& c : refs) ++start_[flat(cell_of(c)) + 1];
    for (std::size_t i = 1; i < start_.size(); ++i) start_[i] += start_[i - 1];
    items_.resize(refs.size());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      items_[fill[flat(cell_of(refs[i]))]++] = static_cast<std::uint32_t>(i);
    }
  }

  std::array<std::int64_t, 3> cell_of(const Coord& c) const {
    return {floor_div(c.x - lo_.x, cell_), floor_div(c.y - lo_.y, cell_),
            floor_div(c.z - lo_.z, cell_)};
  }

  std::int64_t cell_size() const { return cell_; }

  // Largest Chebyshev ring around `cell` that still touches the grid.
  std::int64_t max_ring(const std::array<std::int64_t, 3>& cell) const {
    std::int64_t r = 0;
    for (int a = 0; a < 3; ++a) {
      r = std::max({r, std::abs(cell[a]), std::abs(dims_[a] - 1 - cell[a])});
    }
    return r;
  }

  // Calls f(ref index) for every point in cells at Chebyshev distance r.
  template <typename F>
  void visit_ring(const std::array<std::int64_t, 3>& c, std::int64_t r, F&& f) const {
    const std::int64_t x0 = std::max<std::int64_t>(c[0] - r, 0);
    const std::int64_t x1 = std::min(c[0] + r, dims_[0] - 1);
    const std::int64_t y0 = std::max<std::int64_t>(c[1] - r, 0);
    const std::int64_t y1 = std::min(c[1] + r, dims_[1] - 1);
    const std::int64_t z0 = std::max<std::int64_t>(c[2] - r, 0);
    const std::int64_t z1 = std::min(c[2] + r, dims_[2] - 1);
    for (std::int64_t x = x0; x <= x1; ++x) {
      const bool x_edge = std::abs(x - c[0]) == r;
      for (std::int64_t y = y0; y <= y1; ++y) {
        const bool xy_edge = x_edge || std::abs(y - c[1]) == r;
        for (std::int64_t z = z0; z <= z1; ++z) {
          if (!xy_edge && std::abs(z - c[2]) != r) {
            // Interior of the shell along z: jump to the far face.
            if (z < c[2] + r) z = std::min(c[2] + r, z1 + 1) - 1;
            continue;
          }
          const std::size_t cell = flat({x, y, z});
          for (std::uint32_t i = start_[cell]; i < start_[cell + 1]; ++i) f(items_[i]);
        }
      }
    }
  }

 private:
  std::size_t flat(const std::array<std::int64_t, 3>& c) const {
    return static_cast<std::size_t>((c[0] * dims_[1] + c[1]) * dims_[2] + c[2]);
  }

  Coord lo_, hi_;
  std::int64_t cell_ = 1;
  std::int64_t dims_[3] = {1, 1, 1};
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> items_;
};

}  // namespace

std::uint64_t KnnAdjacency::checksum() const {
  Fnv1a h;
  h.update_u64(anchor_count);
  h.update_u64(k);
  for (std::uint32_t i : neighbor_idx) h.update_u64(i);
  for (const Coord& c : rel_offsets) {
    h.update_u64(static_cast<std::uint32_t>(c.x));
    h.update_u64(static_cast<std::uint32_t>(c.y));
    h.update_u64(static_cast<std::uint32_t>(c.z));
  }
  return h.digest();
}

KnnAdjacency build_knn(std::span<const Coord> anchors, std::span<const Coord> refs,
                       std::size_t k) {
  if (refs.empty()) fail(ErrorCode::kEmptyReference, "build_knn: reference set is empty");
  if (k < 1) fail(ErrorCode::kInvalidArgument, "build_knn: k must be >= 1");
  std::vector<std::uint64_t> keys(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) keys[i] = morton_key(refs[i]);

  KnnAdjacency adj;
  adj.anchor_count = anchors.size();
  adj.k = k;
  adj.neighbor_idx.resize(anchors.size() * k);
  adj.rel_offsets.resize(anchors.size() * k);
  const std::size_t take = std::min(k, refs.size());

  std::vector<Candidate> cand;
  auto emit = [&](std::size_t i) {
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint32_t r = cand[std::min(j, take - 1)].idx;
      adj.neighbor_idx[i * k + j] = r;
      adj.rel_offsets[i * k + j] = {anchors[i].x - refs[r].x, anchors[i].y - refs[r].y,
                                    anchors[i].z - refs[r].z};
    }
  };

  if (refs.size() < kFullScanBelow) {
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      cand.clear();
      for (std::size_t r = 0; r < refs.size(); ++r) {
        cand.push_back({squared_distance(anchors[i], refs[r]), keys[r],
                        static_cast<std::uint32_t>(r)});
      }
      emit(i);
    }
    return adj;
  }

  const Grid grid(refs);
  const std::int64_t s = grid.cell_size();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    cand.clear();
    const auto cell = grid.cell_of(anchors[i]);
    const std::int64_t last = grid.max_ring(cell);
    for (std::int64_t r = 0; r <= last; ++r) {
      grid.visit_ring(cell, r, [&](std::uint32_t idx) {
        cand.push_back({squared_distance(anchors[i], refs[idx]), keys[idx], idx});
      });
      if (cand.size() < take) continue;
      // Anything outside ring r is at least r*s + 1 away along some axis.
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take - 1),
                       cand.end());
      const std::int64_t bound = r * s + 1;
      if (cand[take - 1].d2 < bound * bound) break;
    }
    emit(i);
  }
  return adj;
}

}  // namespace pcdc
