#ifndef PCDC_CTR_HPP_
#define PCDC_CTR_HPP_

#include <span>
#include <string>

#include "pcdc/config.hpp"
#include "pcdc/geometry.hpp"
#include "pcdc/knn.hpp"
#include "pcdc/nn/layers.hpp"

namespace pcdc {

// Vector cross-attention between decoder-side features and a decoded
// reference. ω reweights the values channel-wise and starts as identity.
struct CtrParams {
  nn::LinearLayer q_proj;      // φ
  nn::LinearLayer k_proj;      // ψ
  nn::LinearLayer v_proj;      // α
  nn::Mlp pos_mlp;             // δ: 3 -> C
  nn::Mlp attn_mlp;            // γ: C -> C
  nn::LinearLayer weight_enc;  // ω
  nn::LinearLayer gate;        // bidirectional fusion gate on the query features

  std::size_t width() const { return q_proj.out_width(); }

  template <typename F>
  void for_each_param(F&& f) {
    q_proj.for_each_param(f);
    k_proj.for_each_param(f);
    v_proj.for_each_param(f);
    pos_mlp.for_each_param(f);
    attn_mlp.for_each_param(f);
    weight_enc.for_each_param(f);
    gate.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    q_proj.for_each_param(f);
    k_proj.for_each_param(f);
    v_proj.for_each_param(f);
    pos_mlp.for_each_param(f);
    attn_mlp.for_each_param(f);
    weight_enc.for_each_param(f);
    gate.for_each_param(f);
  }
};

CtrParams make_ctr(const std::string& name, std::size_t width, const CodecConfig& cfg);

struct CtrOutput {
  nn::Var feats;      // N x C
  nn::Var attention;  // (N * K) x C, rows of one query are consecutive
};

// Throws kAdjacencyMismatch when `adj` does not connect (queries, refs).
CtrOutput ctr_refine(nn::Graph& g, const CtrParams& p, std::span<const Coord> queries,
                     nn::Var query_feats, std::span<const Coord> refs, nn::Var ref_feats,
                     const KnnAdjacency& adj);

// Refines against both references and blends them with a sigmoid gate on
// the query features: w * fwd + (1 - w) * bwd.
nn::Var ctr_bidirectional(nn::Graph& g, const CtrParams& p, std::span<const Coord> queries,
                          nn::Var query_feats, std::span<const Coord> fwd_refs,
                          nn::Var fwd_feats, const KnnAdjacency& fwd_adj,
                          std::span<const Coord> bwd_refs, nn::Var bwd_feats,
                          const KnnAdjacency& bwd_adj);

}  // namespace pcdc

#endif  // PCDC_CTR_HPP_
