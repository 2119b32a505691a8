#include "pcdc/geom_codec.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <optional>
#include <string>

#include "pcdc/bytes.hpp"
#include "pcdc/error.hpp"
#include "pcdc/range_coder.hpp"
#include "pcdc/point_cloud.hpp"
#include "pcdc/scale.hpp"

namespace pcdc {

namespace {

constexpr int kLevelGroups = 3;
constexpr int kPopBuckets = 4;
constexpr int kOctreeContexts = kLevelGroups * kPopBuckets;

int pop_bucket(std::uint8_t parent_mask) {
  const int n = std::popcount(parent_mask);
  if (n <= 1) return 0;
  if (n == 2) return 1;
  if (n <= 4) return 2;
  return 3;
}

int level_group(int level, int depth) {
  if (level == depth - 1) return 2;
  if (level == depth - 2) return 1;
  return 0;
}

// Writes the frozen tables, then the range-coded masks (never 0).
void write_masks(ByteWriter& w, int contexts, std::span<const std::uint8_t> ctx,
                 std::span<const std::uint8_t> masks) {
  std::vector<std::array<std::uint64_t, 255>> counts(static_cast<std::size_t>(contexts));
  for (auto& c : counts) c.fill(0);
  for (std::size_t i = 0; i < masks.size(); ++i) ++counts[ctx[i]][masks[i] - 1u];
  std::vector<CdfTable> tables;
  for (const auto& c : counts) {
    w.varint(static_cast<std::uint64_t>(std::count_if(c.begin(), c.end(),
                                                      [](std::uint64_t v) { return v > 0; })));
    for (std::size_t m = 0; m < c.size(); ++m) {
      if (c[m] == 0) continue;
      w.u8(static_cast<std::uint8_t>(m + 1));
      w.varint(c[m]);
    }
    tables.push_back(CdfTable::from_counts(c));
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < masks.size(); ++i) enc.encode(tables[ctx[i]], masks[i] - 1u);
  w.bytes(enc.finish());
}

class MaskReader {
 public:
  MaskReader(ByteReader& r, int contexts) {
    for (int c = 0; c < contexts; ++c) {
      std::array<std::uint64_t, 255> counts{};
      const std::uint64_t entries = r.varint();
      if (entries > 255) fail_decode(r.offset(), "octree: context table too large");
      for (std::uint64_t e = 0; e < entries; ++e) {
        const std::uint8_t m = r.u8();
        if (m == 0) fail_decode(r.offset() - 1, "octree: empty mask in context table");
        counts[m - 1u] = r.varint();
      }
      tables_.push_back(CdfTable::from_counts(counts));
    }
    base_ = r.offset();
    dec_.emplace(r.rest(), base_);
  }

  std::uint8_t next(int ctx) {
    return static_cast<std::uint8_t>(dec_->decode(tables_[static_cast<std::size_t>(ctx)]) + 1);
  }

 private:
  std::vector<CdfTable> tables_;
  std::size_t base_ = 0;
  std::optional<RangeDecoder> dec_;
};

void check_unique(std::span<const Coord> sorted) {
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) {
      fail(ErrorCode::kDuplicatePoints, "octree: duplicate coordinate");
    }
  }
}

// levels[l] = unique coordinates at octree level l (root = level 0).
std::vector<std::vector<Coord>> build_levels(std::span<const Coord> coords, int depth) {
  if (depth < 1 || depth > kMortonBitsPerAxis) {
    fail(ErrorCode::kInvalidArgument, "octree: depth " + std::to_string(depth));
  }
  const std::int32_t limit = 1 << depth;
  for (const Coord& c : coords) {
    if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= limit || c.y >= limit || c.z >= limit) {
      fail(ErrorCode::kCoordOutOfRange, "octree: coordinate outside the depth-" +
                                            std::to_string(depth) + " cube");
    }
  }
  std::vector<std::vector<Coord>> levels(static_cast<std::size_t>(depth) + 1);
  levels[static_cast<std::size_t>(depth)].assign(coords.begin(), coords.end());
  sort_morton(levels[static_cast<std::size_t>(depth)]);
  check_unique(levels[static_cast<std::size_t>(depth)]);
  for (int l = depth - 1; l >= 0; --l) {
    levels[static_cast<std::size_t>(l)] = coarsen(levels[static_cast<std::size_t>(l) + 1]);
  }
  return levels;
}

}  // namespace

std::vector<std::uint8_t> encode_coords(std::span<const Coord> coords, int depth) {
  ByteWriter w;
  const auto levels = coords.empty() ? std::vector<std::vector<Coord>>() : build_levels(coords, depth);
  w.u8(static_cast<std::uint8_t>(depth));
  w.varint(coords.size());
  if (coords.empty()) return w.take();

  std::vector<std::uint8_t> ctx, masks;
  std::vector<std::uint8_t> parent_mask = {0xFF};  // mask of each node's parent
  for (int l = 0; l < depth; ++l) {
    const OctantPooling pool = pool_octants(levels[static_cast<std::size_t>(l) + 1]);
    const int group = level_group(l, depth);
    for (std::size_t i = 0; i < pool.parents.size(); ++i) {
      const int bucket = l == 0 ? 0 : pop_bucket(parent_mask[i]);
      ctx.push_back(static_cast<std::uint8_t>(group * kPopBuckets + bucket));
      masks.push_back(pool.mask[i]);
    }
    std::vector<std::uint8_t> next(pool.child_count());
    for (std::size_t c = 0; c < next.size(); ++c) next[c] = pool.mask[(*pool.parent_of_child)[c]];
    parent_mask = std::move(next);
  }
  write_masks(w, kOctreeContexts, ctx, masks);
  return w.take();
}

std::vector<Coord> decode_coords(std::span<const std::uint8_t> bytes, std::size_t base_offset) {
  ByteReader r(bytes, base_offset);
  const int depth = r.u8();
  const std::uint64_t count = r.varint();
  if (count == 0) return {};
  if (depth < 1 || depth > kMortonBitsPerAxis) fail_decode(base_offset, "octree: bad depth");
  if (count > (std::uint64_t{1} << std::min(3 * depth, 40))) {
    fail_decode(base_offset + 1, "octree: point count exceeds the cube");
  }
  MaskReader masks(r, kOctreeContexts);
  std::vector<Coord> nodes = {Coord{0, 0, 0}};
  std::vector<std::uint8_t> parent_mask = {0xFF};
  for (int l = 0; l < depth; ++l) {
    const int group = level_group(l, depth);
    std::vector<Coord> next;
    std::vector<std::uint8_t> next_parent;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const int bucket = l == 0 ? 0 : pop_bucket(parent_mask[i]);
      const std::uint8_t m = masks.next(group * kPopBuckets + bucket);
      for (int s = 0; s < 8; ++s) {
        if (!((m >> s) & 1)) continue;
        next.push_back(child_of(nodes[i], s));
        next_parent.push_back(m);
      }
      if (next.size() > count) fail_decode(base_offset + bytes.size(), "octree: too many nodes");
    }
    nodes = std::move(next);
    parent_mask = std::move(next_parent);
  }
  if (nodes.size() != count) {
    fail_decode(base_offset + bytes.size(), "octree: decoded " + std::to_string(nodes.size()) +
                                                " points, header says " + std::to_string(count));
  }
  return nodes;
}

std::vector<std::uint8_t> encode_refinement(std::span<const Coord> parents,
                                            std::span<const Coord> children) {
  ByteWriter w;
  w.varint(children.size());
  if (parents.empty()) {
    if (!children.empty()) fail(ErrorCode::kInvalidArgument, "refinement: children without parents");
    return w.take();
  }
  std::vector<Coord> sorted(children.begin(), children.end());
  sort_morton(sorted);
  check_unique(sorted);
  const OctantPooling pool = pool_octants(sorted);
  if (pool.parents.size() != parents.size() ||
      !std::equal(pool.parents.begin(), pool.parents.end(), parents.begin())) {
    fail(ErrorCode::kInvalidArgument, "refinement: children do not cover exactly the parent set");
  }
  const OctantPooling up = pool_octants(parents);
  std::vector<std::uint8_t> ctx(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    ctx[i] = static_cast<std::uint8_t>(pop_bucket(up.mask[(*up.parent_of_child)[i]]));
  }
  write_masks(w, kPopBuckets, ctx, pool.mask);
  return w.take();
}

std::vector<Coord> decode_refinement(std::span<const Coord> parents,
                                     std::span<const std::uint8_t> bytes,
                                     std::size_t base_offset) {
  ByteReader r(bytes, base_offset);
  const std::uint64_t count = r.varint();
  if (parents.empty()) {
    if (count != 0) fail_decode(base_offset, "refinement: children without parents");
    return {};
  }
  if (count > 8 * parents.size() || count < parents.size()) {
    fail_decode(base_offset, "refinement: implausible child count");
  }
  const OctantPooling up = pool_octants(parents);
  MaskReader masks(r, kPopBuckets);
  std::vector<Coord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const std::uint8_t m = masks.next(pop_bucket(up.mask[(*up.parent_of_child)[i]]));
    for (int s = 0; s < 8; ++s) {
      if ((m >> s) & 1) out.push_back(child_of(parents[i], s));
    }
  }
  if (out.size() != count) {
    fail_decode(base_offset + bytes.size(), "refinement: decoded child count mismatch");
  }
  return out;
}

std::vector<std::size_t> octree_mask_counts(std::span<const Coord> coords, int depth) {
  std::vector<std::size_t> out(static_cast<std::size_t>(depth), 0);
  if (coords.empty()) return out;
  const auto levels = build_levels(coords, depth);
  for (int l = 0; l < depth; ++l) out[static_cast<std::size_t>(l)] = levels[static_cast<std::size_t>(l)].size();
  return out;
}

}  // namespace pcdc
