#include "pcdc/scale.hpp"

#include <algorithm>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc {

OctantPooling pool_octants(std::span<const Coord> children) {
  if (children.empty()) fail(ErrorCode::kEmptyCloud, "pool_octants: empty level");
  if (!is_morton_sorted(children)) {
    fail(ErrorCode::kScanOrderError, "pool_octants: children are not Morton sorted");
  }
  OctantPooling p;
  p.parent_of_child = std::make_shared<std::vector<std::uint32_t>>();
  p.slot = std::make_shared<std::vector<std::uint8_t>>();
  p.parent_of_child->reserve(children.size());
  p.slot->reserve(children.size());
  for (const Coord& c : children) {
    const Coord parent = parent_of(c);
    if (p.parents.empty() || p.parents.back() != parent) {
      p.parents.push_back(parent);
      p.mask.push_back(0);
    }
    const int s = child_slot(c);
    p.parent_of_child->push_back(static_cast<std::uint32_t>(p.parents.size() - 1));
    p.slot->push_back(static_cast<std::uint8_t>(s));
    p.mask.back() = static_cast<std::uint8_t>(p.mask.back() | (1u << s));
  }
  return p;
}

nn::Tensor mask_bits(std::span<const std::uint8_t> masks) {
  nn::Tensor t(masks.size(), 8);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (int s = 0; s < 8; ++s) t(i, static_cast<std::size_t>(s)) = (masks[i] >> s) & 1;
  }
  return t;
}

nn::Tensor neighbor_occupancy(std::span<const Coord> coords) {
  if (!is_morton_sorted(coords)) {
    fail(ErrorCode::kScanOrderError, "neighbor_occupancy: coordinates are not Morton sorted");
  }
  std::vector<std::uint64_t> keys(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) keys[i] = morton_key(coords[i]);
  const std::int32_t limit = 1 << kMortonBitsPerAxis;
  nn::Tensor t(coords.size(), kNeighborBits);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    std::size_t col = 0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const Coord n{coords[i].x + dx, coords[i].y + dy, coords[i].z + dz};
          const bool inside = n.x >= 0 && n.y >= 0 && n.z >= 0 && n.x < limit && n.y < limit &&
                              n.z < limit;
          if (inside && std::binary_search(keys.begin(), keys.end(), morton_key(n))) {
            t(i, col) = 1.0;
          }
          ++col;
        }
      }
    }
  }
  return t;
}

nn::Var DownsampleBlock::forward(nn::Graph& g, const OctantPooling& pool,
                                 nn::Var child_feats) const {
  const std::size_t c = g.value(child_feats).cols();
  if (c != in_width() || g.value(child_feats).rows() != pool.child_count()) {
    fail(ErrorCode::kShapeMismatch, "downsample: expected " + std::to_string(pool.child_count()) +
                                        " x " + std::to_string(in_width()) + " features");
  }
  const nn::Var slots =
      g.scatter_slots(child_feats, pool.parent_of_child, pool.slot, pool.parents.size(), 8);
  const nn::Var x = g.concat_cols({slots, g.constant(mask_bits(pool.mask))});
  const nn::Var y = mlp.forward(g, x);
  switch (act) {
    case OutputAct::kRelu:
      return g.relu(y);
    case OutputAct::kLayerNorm:
      return g.layer_norm(y, 1e-5);
    case OutputAct::kNone:
      break;
  }
  return y;
}

DownsampleBlock make_downsample(const std::string& name, std::size_t c_in, std::size_t c_out,
                                OutputAct act, const CodecConfig& cfg) {
  const std::size_t in = 8 * c_in + 8;
  const auto hidden = static_cast<std::size_t>(hidden_width(cfg, static_cast<int>(in)));
  return DownsampleBlock{nn::make_mlp(name, {in, hidden, c_out}, cfg.seed), act};
}

ScaleLevel downsample(const DownsampleBlock& block, const ScaleLevel& level) {
  const OctantPooling pool = pool_octants(level.coords);
  nn::Graph g(false);
  const nn::Var y = block.forward(g, pool, g.view(level.feats));
  return ScaleLevel{level.stage + 1, pool.parents, g.value(y)};
}

UpsampleBlock make_upsample(const std::string& name, std::size_t c_in, std::size_t c_out,
                            const CodecConfig& cfg) {
  const std::size_t in = c_in + kNeighborBits;
  const auto hidden = static_cast<std::size_t>(hidden_width(cfg, static_cast<int>(in)));
  return UpsampleBlock{nn::make_mlp(name + ".occ", {in, hidden, 8}, cfg.seed),
                       nn::make_linear(name + ".child", in, 8 * c_out, cfg.seed)};
}

UpsampleOutput upsample_forward(nn::Graph& g, const UpsampleBlock& block,
                                std::span<const Coord> parents, nn::Var parent_feats,
                                std::size_t target_count, std::span<const Coord> teacher) {
  const std::size_t n = parents.size();
  if (n == 0) fail(ErrorCode::kEmptyCloud, "upsample: empty level");
  if (g.value(parent_feats).rows() != n) {
    fail(ErrorCode::kShapeMismatch, "upsample: feature rows do not match coordinates");
  }
  if (target_count < 1) fail(ErrorCode::kInvalidArgument, "upsample: target_count must be >= 1");
  if (target_count > 8 * n) {
    fail(ErrorCode::kInsufficientCandidates,
         "upsample: " + std::to_string(target_count) + " children requested from " +
             std::to_string(8 * n) + " candidates");
  }
  const nn::Var input =
      g.concat_cols({parent_feats, g.constant(neighbor_occupancy(parents))});
  const nn::Var logits = block.occupancy.forward(g, input);
  UpsampleOutput out;
  out.probs = g.sigmoid(logits);

  // keep[i * 8 + s] marks child s of parent i.
  std::vector<char> keep(8 * n, 0);
  if (!teacher.empty()) {
    std::size_t i = 0;
    for (const Coord& c : teacher) {
      const Coord p = parent_of(c);
      while (i < n && parents[i] != p) ++i;
      if (i == n) {
        fail(ErrorCode::kInvalidArgument, "upsample: teacher child without a parent");
      }
      keep[i * 8 + static_cast<std::size_t>(child_slot(c))] = 1;
    }
  } else {
    const nn::Tensor& lv = g.value(logits);
    std::vector<std::uint32_t> order(8 * n);
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    // Candidate index i*8+s increases with the child's Morton key because
    // parents are sorted and slots follow z-order.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_count),
                      order.end(), [&lv](std::uint32_t a, std::uint32_t b) {
                        return lv[a] != lv[b] ? lv[a] > lv[b] : a < b;
                      });
    for (std::size_t j = 0; j < target_count; ++j) keep[order[j]] = 1;
  }

  auto rows = std::make_shared<std::vector<std::uint32_t>>();
  auto slots = std::make_shared<std::vector<std::uint8_t>>();
  for (std::size_t i = 0; i < n; ++i) {
    for (int s = 0; s < 8; ++s) {
      if (!keep[i * 8 + static_cast<std::size_t>(s)]) continue;
      rows->push_back(static_cast<std::uint32_t>(i));
      slots->push_back(static_cast<std::uint8_t>(s));
      out.coords.push_back(child_of(parents[i], s));
    }
  }
  const nn::Var all = block.child.forward(g, input);
  out.feats = g.relu(g.gather_slots(all, rows, slots, block.out_width()));
  return out;
}

UpsampleResult upsample(const UpsampleBlock& block, const ScaleLevel& level,
                        std::size_t target_count) {
  nn::Graph g(false);
  const UpsampleOutput o = upsample_forward(g, block, level.coords, g.view(level.feats),
                                            target_count);
  return UpsampleResult{ScaleLevel{level.stage - 1, o.coords, g.value(o.feats)},
                        g.value(o.probs)};
}

nn::Tensor occupancy_targets(std::span<const Coord> parents, std::span<const Coord> children) {
  std::vector<std::uint64_t> keys(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) keys[i] = morton_key(parents[i]);
  nn::Tensor t(parents.size(), 8);
  for (const Coord& c : children) {
    const std::uint64_t k = morton_key(parent_of(c));
    const auto it = std::lower_bound(keys.begin(), keys.end(), k);
    if (it == keys.end() || *it != k) continue;
    t(static_cast<std::size_t>(it - keys.begin()), static_cast<std::size_t>(child_slot(c))) = 1.0;
  }
  return t;
}

}  // namespace pcdc
