#include "pcdc/ctr.hpp"

#include <memory>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc {

namespace {

constexpr double kLayerNormEps = 1e-5;
// Offsets enter δ in units of this many stage voxels.
constexpr double kOffsetScale = 0.25;

}  // namespace

CtrParams make_ctr(const std::string& name, std::size_t width, const CodecConfig& cfg) {
  const auto h3 = static_cast<std::size_t>(hidden_width(cfg, 3));
  const auto hc = static_cast<std::size_t>(hidden_width(cfg, static_cast<int>(width)));
  return CtrParams{nn::make_linear(name + ".q", width, width, cfg.seed),
                   nn::make_linear(name + ".k", width, width, cfg.seed),
                   nn::make_linear(name + ".v", width, width, cfg.seed),
                   nn::make_mlp(name + ".pos", {3, h3, width}, cfg.seed),
                   nn::make_mlp(name + ".attn", {width, hc, width}, cfg.seed),
                   nn::identity_linear(name + ".omega", width),
                   nn::make_linear(name + ".gate", width, width, cfg.seed)};
}

CtrOutput ctr_refine(nn::Graph& g, const CtrParams& p, std::span<const Coord> queries,
                     nn::Var query_feats, std::span<const Coord> refs, nn::Var ref_feats,
                     const KnnAdjacency& adj) {
  const std::size_t n = queries.size(), k = adj.k;
  if (adj.anchor_count != n || adj.neighbor_idx.size() != n * k) {
    fail(ErrorCode::kAdjacencyMismatch, "ctr_refine: adjacency rows do not match queries");
  }
  if (g.value(query_feats).rows() != n || g.value(ref_feats).rows() != refs.size()) {
    fail(ErrorCode::kShapeMismatch, "ctr_refine: feature rows do not match coordinates");
  }
  if (g.value(query_feats).cols() != p.width() || g.value(ref_feats).cols() != p.width()) {
    fail(ErrorCode::kShapeMismatch, "ctr_refine: feature width mismatch");
  }
  auto idx = std::make_shared<std::vector<std::int64_t>>(n * k);
  nn::Tensor delta(n * k, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint32_t r = adj.index(i, j);
      const Coord& o = adj.offset(i, j);
      if (r >= refs.size() || o.x != queries[i].x - refs[r].x || o.y != queries[i].y - refs[r].y ||
          o.z != queries[i].z - refs[r].z) {
        fail(ErrorCode::kAdjacencyMismatch, "ctr_refine: adjacency was built for other points");
      }
      (*idx)[i * k + j] = r;
      delta(i * k + j, 0) = o.x * kOffsetScale;
      delta(i * k + j, 1) = o.y * kOffsetScale;
      delta(i * k + j, 2) = o.z * kOffsetScale;
    }
  }
  const nn::Var q = g.repeat_rows(p.q_proj.forward(g, query_feats), k);
  const nn::Var keys = g.gather_rows(p.k_proj.forward(g, ref_feats), idx);
  const nn::Var values =
      g.gather_rows(p.weight_enc.forward(g, p.v_proj.forward(g, ref_feats)), idx);
  const nn::Var pos = p.pos_mlp.forward(g, g.constant(std::move(delta)));
  const nn::Var logits = p.attn_mlp.forward(g, g.add(g.sub(q, keys), pos));
  const nn::Var attn = g.segment_softmax(logits, k);
  const nn::Var y = g.segment_sum(g.mul(attn, values), k);
  return CtrOutput{g.layer_norm(g.add(query_feats, y), kLayerNormEps), attn};
}

nn::Var ctr_bidirectional(nn::Graph& g, const CtrParams& p, std::span<const Coord> queries,
                          nn::Var query_feats, std::span<const Coord> fwd_refs,
                          nn::Var fwd_feats, const KnnAdjacency& fwd_adj,
                          std::span<const Coord> bwd_refs, nn::Var bwd_feats,
                          const KnnAdjacency& bwd_adj) {
  const nn::Var rf = ctr_refine(g, p, queries, query_feats, fwd_refs, fwd_feats, fwd_adj).feats;
  const nn::Var rb = ctr_refine(g, p, queries, query_feats, bwd_refs, bwd_feats, bwd_adj).feats;
  const nn::Var w = g.sigmoid(p.gate.forward(g, query_feats));
  return g.add(g.mul(w, rf), g.mul(g.one_minus(w), rb));
}

}  // namespace pcdc
