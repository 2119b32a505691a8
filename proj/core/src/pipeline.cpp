#include "pcdc/pipeline.hpp"

#include <cmath>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/geom_codec.hpp"
#include "pcdc/hash.hpp"
#include "pcdc/knn.hpp"
#include "pcdc/range_coder.hpp"

namespace pcdc {

namespace {

// pools[k] maps stage-k points to their stage-(k+1) parents.
struct Pyramid {
  std::array<std::vector<Coord>, 6> coords;
  std::array<OctantPooling, 5> pools;
};

Pyramid build_pyramid(const std::vector<Coord>& c0) {
  Pyramid p;
  p.coords[0] = c0;
  for (int k = 0; k < 5; ++k) {
    p.pools[static_cast<std::size_t>(k)] = pool_octants(p.coords[static_cast<std::size_t>(k)]);
    p.coords[static_cast<std::size_t>(k) + 1] = p.pools[static_cast<std::size_t>(k)].parents;
  }
  return p;
}

// Pools stage 3 and 4 of a frame whose stage-3 coordinates are known.
struct UpperLevels {
  OctantPooling p34;
  OctantPooling p45;
};

UpperLevels upper_levels(const std::vector<Coord>& c3) {
  UpperLevels u;
  u.p34 = pool_octants(c3);
  u.p45 = pool_octants(u.p34.parents);
  return u;
}

double coord_extent(const CodecConfig& cfg) { return std::ldexp(1.0, cfg.bit_depth - 3); }

struct Stage3 {
  std::vector<Coord> coords;
  nn::Var feats;
};

nn::Var encode_features(nn::Graph& g, const Pyramid& pyr, const CodecWeights& w) {
  nn::Var f = g.constant(nn::Tensor(pyr.coords[0].size(), 1, 1.0));
  for (std::size_t k = 0; k < 3; ++k) f = w.down[k].forward(g, pyr.pools[k], f);
  return f;
}

Stage3 reference_stage3(nn::Graph& g, const FramePointCloud& ref, const CodecWeights& w) {
  if (ref.coords.empty()) fail(ErrorCode::kEmptyReference, "reference frame is empty");
  std::vector<Coord> coords = ref.coords;
  nn::Var f = g.constant(nn::Tensor(coords.size(), 1, 1.0));
  for (std::size_t k = 0; k < 3; ++k) {
    const OctantPooling pool = pool_octants(coords);
    f = w.down[k].forward(g, pool, f);
    coords = pool.parents;
  }
  return Stage3{std::move(coords), f};
}

std::vector<Stage3> reference_levels(nn::Graph& g, FrameKind kind, const ReferenceSet& refs,
                                     const CodecWeights& w) {
  std::vector<Stage3> out;
  if (kind == FrameKind::kI) return out;
  if (!refs.past) fail(ErrorCode::kSchedulingError, "missing past reference");
  out.push_back(reference_stage3(g, *refs.past, w));
  if (kind == FrameKind::kB) {
    if (!refs.future) fail(ErrorCode::kSchedulingError, "missing future reference");
    out.push_back(reference_stage3(g, *refs.future, w));
  }
  return out;
}

struct ContextOut {
  nn::Var ctx;
  std::uint64_t adjacency_checksum = 0;
};

ContextOut build_context(nn::Graph& g, const std::vector<Coord>& c3,
                         const std::vector<Stage3>& refs, const CodecConfig& cfg,
                         const CodecWeights& w, bool zero) {
  ContextOut out;
  if (refs.empty() || zero) {
    out.ctx = g.constant(nn::Tensor(c3.size(), static_cast<std::size_t>(cfg.context_width())));
    return out;
  }
  const double extent = coord_extent(cfg);
  const nn::Var desc = g.constant(anchor_descriptor(c3, extent));
  Fnv1a h;
  std::vector<nn::Var> aligned;
  for (const Stage3& r : refs) {
    const KnnAdjacency adj = build_knn(c3, r.coords, static_cast<std::size_t>(cfg.knn_k));
    h.update_u64(adj.checksum());
    aligned.push_back(fmt_align(g, w.align, c3, r.coords, r.feats, adj, extent).feats);
  }
  out.adjacency_checksum = h.digest();
  out.ctx = aligned.size() == 1 ? single_ref_context(g, w.fuse, desc, aligned[0]).feats
                                : bi_fuse(g, w.fuse, desc, aligned[0], aligned[1]).feats;
  return out;
}

nn::Var contextual_decode(nn::Graph& g, const CodecWeights& w, const OctantPooling& p34,
                          nn::Var latent, nn::Var ctx) {
  const std::size_t c3 = w.decoder.mix.out_width();
  const nn::Var expanded = w.decoder.expand.forward(g, latent);
  const nn::Var child = g.gather_slots(expanded, p34.parent_of_child, p34.slot, c3);
  return w.decoder.mix.forward(g, g.concat_cols({child, ctx}));
}

nn::Var refine(nn::Graph& g, const std::vector<Coord>& c3, nn::Var aligned,
               const std::vector<Stage3>& refs, const CodecConfig& cfg, const CodecWeights& w) {
  const auto k = static_cast<std::size_t>(cfg.ctr_k);
  if (refs.empty()) return g.layer_norm(aligned, 1e-5);
  const KnnAdjacency fa = build_knn(c3, refs[0].coords, k);
  if (refs.size() == 1) {
    return ctr_refine(g, w.ctr, c3, aligned, refs[0].coords, refs[0].feats, fa).feats;
  }
  const KnnAdjacency ba = build_knn(c3, refs[1].coords, k);
  return ctr_bidirectional(g, w.ctr, c3, aligned, refs[0].coords, refs[0].feats, fa,
                           refs[1].coords, refs[1].feats, ba);
}

std::shared_ptr<std::vector<std::int64_t>> widen(const std::vector<std::uint32_t>& v) {
  return std::make_shared<std::vector<std::int64_t>>(v.begin(), v.end());
}

std::uint64_t tensor_checksum(const nn::Tensor& t) {
  Fnv1a h;
  h.update_u64(t.rows());
  h.update_u64(t.cols());
  for (double v : t.flat()) h.update_f64(v);
  return h.digest();
}

std::vector<Coord> upsample_chain(nn::Graph& g, const CodecWeights& w,
                                  const std::vector<Coord>& c3, nn::Var feats,
                                  const std::array<std::uint32_t, 3>& targets) {
  std::vector<Coord> coords = c3;
  for (std::size_t s = 0; s < 3; ++s) {
    UpsampleOutput o = upsample_forward(g, w.up[s], coords, feats, targets[s]);
    coords = std::move(o.coords);
    feats = o.feats;
  }
  return coords;
}

FramePointCloud decode_impl(const FramePayload& payload, const ReferenceSet& refs,
                            const CodecConfig& cfg, const CodecWeights& w,
                            const CodecOptions& opts, FeatureDiagnostics* diag) {
  nn::Graph g(false);
  const std::vector<Stage3> ref3 = reference_levels(g, payload.kind, refs, w);

  const std::vector<Coord> c4 = decode_coords(payload.c4);
  if (c4.empty()) fail_decode(0, "empty stage-4 geometry");
  const std::vector<Coord> c3 = decode_refinement(c4, payload.c3);
  const UpperLevels up = upper_levels(c3);
  const std::size_t n4 = c4.size(), n5 = up.p45.parents.size();

  const ContextOut ctx = build_context(g, c3, ref3, cfg, w, opts.zero_context);
  const nn::Var ctx4 = g.scatter_mean(ctx.ctx, up.p34.parent_of_child, n4);

  const EntropyParams& ent = w.entropy;
  RangeDecoder zdec(payload.z);
  const nn::Tensor z_hat = decode_factorized(zdec, n5, ent.factorized.value);
  const auto z_parent = widen(*up.p45.parent_of_child);
  const SequentialPrior prior(ent, z_hat, *z_parent, g.value(ctx4));

  const std::size_t c = ent.latent_width();
  RangeDecoder ydec(payload.f4);
  nn::Tensor y_hat(0, c);
  std::vector<double> rows;
  rows.reserve(n4 * c);
  for (std::size_t i = 0; i < n4; ++i) {
    const LaplaceParams lp = prior.next(y_hat, i);
    for (std::size_t k = 0; k < c; ++k) rows.push_back(decode_laplace(ydec, lp.mu[k], lp.sigma[k]));
    y_hat = nn::Tensor(i + 1, c, rows);
  }

  const nn::Var aligned = contextual_decode(g, w, up.p34, g.constant(y_hat), ctx.ctx);
  const nn::Var refined = refine(g, c3, aligned, ref3, cfg, w);
  std::vector<Coord> coords = upsample_chain(g, w, c3, refined, payload.target_counts);
  if (coords.size() != payload.point_count) {
    fail_decode(0, "reconstructed point count differs from the header");
  }
  if (diag) {
    diag->c3 = c3;
    diag->aligned = g.value(aligned);
    diag->refined = g.value(refined);
    diag->context_checksum = tensor_checksum(g.value(ctx.ctx));
    diag->adjacency_checksum = ctx.adjacency_checksum;
  }
  FramePointCloud out;
  out.frame_index = payload.frame_index;
  out.feats = nn::Tensor(coords.size(), 1, 1.0);
  out.coords = std::move(coords);
  return out;
}

}  // namespace

EncodeResult encode_frame(const FramePointCloud& cur, FrameKind kind, const ReferenceSet& refs,
                          const CodecConfig& cfg, const CodecWeights& w,
                          const CodecOptions& opts) {
  if (cur.coords.empty()) fail(ErrorCode::kEmptyCloud, "encode_frame: empty frame");
  const Pyramid pyr = build_pyramid(cur.coords);
  nn::Graph g(false);
  const std::vector<Stage3> ref3 = reference_levels(g, kind, refs, w);
  const nn::Var f3 = encode_features(g, pyr, w);
  const std::vector<Coord>& c3 = pyr.coords[3];
  const std::vector<Coord>& c4 = pyr.coords[4];
  const ContextOut ctx = build_context(g, c3, ref3, cfg, w, opts.zero_context);

  const nn::Var y = w.latent.forward(g, pyr.pools[3], g.concat_cols({f3, ctx.ctx}));
  const nn::Var z = w.entropy.hyper_analysis.forward(g, pyr.pools[4], y);
  const nn::Tensor y_hat = quantize(g.value(y));
  const nn::Tensor z_hat = quantize(g.value(z));
  const nn::Var ctx4 = g.scatter_mean(ctx.ctx, pyr.pools[3].parent_of_child, c4.size());
  const PriorTerms prior = predict_params(g, w.entropy, g.constant(z_hat),
                                          widen(*pyr.pools[4].parent_of_child),
                                          g.constant(y_hat), ctx4);
  const nn::Tensor& mu = g.value(prior.mu);
  const nn::Tensor& sigma = g.value(prior.sigma);

  EncodeResult r;
  FramePayload& p = r.payload;
  p.frame_index = cur.frame_index;
  p.kind = kind;
  p.point_count = static_cast<std::uint32_t>(cur.coords.size());
  p.target_counts = {static_cast<std::uint32_t>(pyr.coords[2].size()),
                     static_cast<std::uint32_t>(pyr.coords[1].size()),
                     static_cast<std::uint32_t>(pyr.coords[0].size())};
  p.c4 = encode_coords(c4, cfg.bit_depth - 4);
  p.c3 = encode_refinement(c4, c3);
  {
    RangeEncoder enc;
    encode_factorized(enc, z_hat, w.entropy.factorized.value);
    p.z = enc.finish();
  }
  {
    RangeEncoder enc;
    for (std::size_t i = 0; i < y_hat.size(); ++i) encode_laplace(enc, y_hat[i], mu[i], sigma[i]);
    p.f4 = enc.finish();
  }
  r.estimate_f4_bits = rate_estimate(y_hat, LaplaceParams{mu, sigma});
  r.estimate_z_bits = factorized_rate(z_hat, w.entropy.factorized.value);

  r.reconstruction = decode_frame(p, refs, cfg, w, opts, &r.diagnostics);
  FeatureDiagnostics& d = r.diagnostics;
  d.truth = g.value(f3);
  if (!ref3.empty()) {
    const KnnAdjacency nn1 = build_knn(c3, ref3[0].coords, 1);
    const nn::Tensor& rf = g.value(ref3[0].feats);
    d.interpolated = nn::Tensor(c3.size(), rf.cols());
    for (std::size_t i = 0; i < c3.size(); ++i) {
      const auto src = rf.row(nn1.index(i, 0));
      std::copy(src.begin(), src.end(), d.interpolated.row(i).begin());
    }
  }
  return r;
}

FramePointCloud decode_frame(const FramePayload& payload, const ReferenceSet& refs,
                             const CodecConfig& cfg, const CodecWeights& w,
                             const CodecOptions& opts, FeatureDiagnostics* diag) {
  if (payload.kind != FrameKind::kI && !refs.past) {
    fail(ErrorCode::kSchedulingError,
         "frame " + std::to_string(payload.frame_index) + ": missing past reference");
  }
  if (payload.kind == FrameKind::kB && !refs.future) {
    fail(ErrorCode::kSchedulingError,
         "frame " + std::to_string(payload.frame_index) + ": missing future reference");
  }
  try {
    return decode_impl(payload, refs, cfg, w, opts, diag);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchedulingError) throw;
    const std::string msg =
        "frame " + std::to_string(payload.frame_index) + ": " + std::string(e.what());
    if (e.byte_offset()) fail_decode(*e.byte_offset(), msg);
    fail(ErrorCode::kDecodeError, msg);
  }
}

FrameTerms forward_frame(nn::Graph& g, const FramePointCloud& cur, FrameKind kind,
                         const ReferenceSet& refs, const CodecConfig& cfg, const CodecWeights& w,
                         const ForwardOptions& opts) {
  if (cur.coords.empty()) fail(ErrorCode::kEmptyCloud, "forward_frame: empty frame");
  if (opts.training && !opts.rng) {
    fail(ErrorCode::kInvalidArgument, "forward_frame: training needs a noise generator");
  }
  const Pyramid pyr = build_pyramid(cur.coords);
  const std::vector<Stage3> ref3 = reference_levels(g, kind, refs, w);
  const nn::Var f3 = encode_features(g, pyr, w);
  const std::vector<Coord>& c3 = pyr.coords[3];
  const ContextOut ctx = build_context(g, c3, ref3, cfg, w, opts.zero_context);

  const nn::Var y = w.latent.forward(g, pyr.pools[3], g.concat_cols({f3, ctx.ctx}));
  const nn::Var z = w.entropy.hyper_analysis.forward(g, pyr.pools[4], y);
  nn::Var y_t, z_t;
  if (opts.training) {
    const nn::Tensor& yv = g.value(y);
    const nn::Tensor& zv = g.value(z);
    y_t = g.add(y, g.constant(uniform_noise(yv.rows(), yv.cols(), *opts.rng)));
    z_t = g.add(z, g.constant(uniform_noise(zv.rows(), zv.cols(), *opts.rng)));
  } else {
    y_t = g.constant(quantize(g.value(y)));
    z_t = g.constant(quantize(g.value(z)));
  }
  const nn::Var ctx4 = g.scatter_mean(ctx.ctx, pyr.pools[3].parent_of_child, pyr.coords[4].size());
  const PriorTerms prior = predict_params(g, w.entropy, z_t, widen(*pyr.pools[4].parent_of_child),
                                          y_t, ctx4);
  const nn::Var y_bits =
      g.sum_neg_log2(g.laplace_likelihood(y_t, prior.mu, prior.sigma, kPmin));
  const nn::Var z_bits = g.sum_neg_log2(g.factorized_likelihood(
      z_t, g.param(w.entropy.factorized), kFactorizedUnits, kPmin));

  FrameTerms t;
  t.rate_bits = g.add(y_bits, z_bits);
  t.point_count = cur.coords.size();
  t.truth3 = g.detach(f3);
  t.aligned3 = contextual_decode(g, w, pyr.pools[3], y_t, ctx.ctx);
  t.refined3 = refine(g, c3, t.aligned3, ref3, cfg, w);
  nn::Var feats = t.refined3;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::vector<Coord>& parents = pyr.coords[3 - s];
    const std::vector<Coord>& children = pyr.coords[2 - s];
    UpsampleOutput o = upsample_forward(g, w.up[s], parents, feats, children.size(), children);
    t.probs[s] = o.probs;
    t.targets[s] = std::make_shared<const nn::Tensor>(occupancy_targets(parents, children));
    feats = o.feats;
  }
  return t;
}

nn::Var distortion(nn::Graph& g, std::span<const nn::Var> probs,
                   std::span<const std::shared_ptr<const nn::Tensor>> targets) {
  if (probs.empty() || probs.size() != targets.size()) {
    fail(ErrorCode::kShapeMismatch, "distortion: need one target per stage");
  }
  nn::Var total = g.bce_mean(probs[0], targets[0], kBceClamp);
  for (std::size_t s = 1; s < probs.size(); ++s) {
    total = g.add(total, g.bce_mean(probs[s], targets[s], kBceClamp));
  }
  return g.scale(total, 1.0 / static_cast<double>(probs.size()));
}

nn::Var rd_loss(nn::Graph& g, nn::Var rate_bits, std::size_t point_count,
                std::span<const nn::Var> probs,
                std::span<const std::shared_ptr<const nn::Tensor>> targets, double lambda) {
  if (point_count == 0) fail(ErrorCode::kEmptyCloud, "rd_loss: no points");
  const nn::Var rate = g.scale(rate_bits, 1.0 / static_cast<double>(point_count));
  return g.add(rate, g.scale(distortion(g, probs, targets), lambda));
}

}  // namespace pcdc
