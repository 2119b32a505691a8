#include "pcdc/align.hpp"

#include <memory>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/scale.hpp"

namespace pcdc {

AlignParams make_align(const std::string& name, std::size_t width, const CodecConfig& cfg) {
  const std::size_t in = width + 3;
  const auto hidden = static_cast<std::size_t>(hidden_width(cfg, static_cast<int>(in)));
  return AlignParams{nn::make_mlp(name + ".mask", {in, hidden, 1}, cfg.seed),
                     nn::make_mlp(name + ".pred", {in, hidden, width}, cfg.seed)};
}

AlignedFeatures fmt_align(nn::Graph& g, const AlignParams& p, std::span<const Coord> anchors,
                          std::span<const Coord> refs, nn::Var ref_feats,
                          const KnnAdjacency& adj, double coord_extent) {
  const std::size_t n = anchors.size(), k = adj.k;
  if (adj.anchor_count != n || adj.neighbor_idx.size() != n * k) {
    fail(ErrorCode::kAdjacencyMismatch, "fmt_align: adjacency has " +
                                            std::to_string(adj.anchor_count) + " rows for " +
                                            std::to_string(n) + " anchors");
  }
  if (g.value(ref_feats).rows() != refs.size()) {
    fail(ErrorCode::kAdjacencyMismatch, "fmt_align: reference features do not match coordinates");
  }
  if (g.value(ref_feats).cols() != p.width()) {
    fail(ErrorCode::kShapeMismatch, "fmt_align: feature width mismatch");
  }
  auto idx = std::make_shared<std::vector<std::int64_t>>(n * k);
  nn::Tensor delta(n * k, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint32_t r = adj.index(i, j);
      const Coord& o = adj.offset(i, j);
      if (r >= refs.size() || o.x != anchors[i].x - refs[r].x || o.y != anchors[i].y - refs[r].y ||
          o.z != anchors[i].z - refs[r].z) {
        fail(ErrorCode::kAdjacencyMismatch, "fmt_align: adjacency was built for other frames");
      }
      (*idx)[i * k + j] = r;
      delta(i * k + j, 0) = o.x;
      delta(i * k + j, 1) = o.y;
      delta(i * k + j, 2) = o.z;
    }
  }
  const nn::Var neigh = g.gather_rows(ref_feats, idx);
  const nn::Var h = g.concat_cols({neigh, g.constant(std::move(delta))});
  const nn::Var alpha = g.segment_softmax(p.mask.forward(g, h), k);
  const nn::Var pooled = g.segment_sum(g.mul_col(neigh, alpha), k);

  nn::Tensor pos(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    pos(i, 0) = anchors[i].x / coord_extent;
    pos(i, 1) = anchors[i].y / coord_extent;
    pos(i, 2) = anchors[i].z / coord_extent;
  }
  const nn::Var z = g.concat_cols({pooled, g.constant(std::move(pos))});
  return AlignedFeatures{p.pred.forward(g, z), alpha};
}

nn::Tensor anchor_descriptor(std::span<const Coord> coords, double coord_extent) {
  const nn::Tensor occ = neighbor_occupancy(coords);
  nn::Tensor d(coords.size(), kDescriptorWidth);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    d(i, 0) = coords[i].x / coord_extent;
    d(i, 1) = coords[i].y / coord_extent;
    d(i, 2) = coords[i].z / coord_extent;
    for (std::size_t c = 0; c < kNeighborBits; ++c) d(i, 3 + c) = occ(i, c);
  }
  return d;
}

FuseParams make_fuse(const std::string& name, std::size_t desc_width, std::size_t width,
                     std::size_t ctx_width, const CodecConfig& cfg) {
  return FuseParams{nn::make_linear(name + ".gate", desc_width, width, cfg.seed),
                    nn::make_linear(name + ".ctx", desc_width + width, ctx_width, cfg.seed)};
}

nn::Var fuse_terms(nn::Graph& g, const FuseParams& p, nn::Var desc, nn::Var fwd_term,
                   nn::Var bwd_term) {
  const nn::Var fused = g.concat_cols({desc, g.mul(fwd_term, bwd_term)});
  return p.ctx.forward(g, fused);
}

FusedContext bi_fuse(nn::Graph& g, const FuseParams& p, nn::Var desc, nn::Var fwd, nn::Var bwd) {
  const std::size_t n = g.value(desc).rows();
  if (g.value(fwd).rows() != n || g.value(bwd).rows() != n) {
    fail(ErrorCode::kShapeMismatch, "bi_fuse: row counts differ");
  }
  const nn::Var wf = g.sigmoid(p.gate.forward(g, desc));
  const nn::Var wb = g.one_minus(wf);
  return FusedContext{fuse_terms(g, p, desc, g.mul(wf, fwd), g.mul(wb, bwd)), wf};
}

FusedContext single_ref_context(nn::Graph& g, const FuseParams& p, nn::Var desc, nn::Var fwd) {
  const nn::Tensor& f = g.value(fwd);
  if (f.rows() != g.value(desc).rows()) {
    fail(ErrorCode::kShapeMismatch, "single_ref_context: row counts differ");
  }
  const nn::Var ones = g.constant(nn::Tensor(f.rows(), f.cols(), 1.0));
  return FusedContext{fuse_terms(g, p, desc, fwd, ones), ones};
}

}  // namespace pcdc
