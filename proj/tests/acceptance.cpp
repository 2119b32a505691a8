// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "pcdc/align.hpp"
#include "pcdc/container.hpp"
#include "pcdc/ctr.hpp"
#include "pcdc/entropy.hpp"
#include "pcdc/error.hpp"
#include "pcdc/geom_codec.hpp"
#include "pcdc/metrics.hpp"
#include "pcdc/nn/grad_check.hpp"
#include "pcdc/nn/prob.hpp"
#include "pcdc/pipeline.hpp"
#include "pcdc/ra_schedule.hpp"
#include "pcdc/range_coder.hpp"
#include "pcdc/sequence.hpp"
#include "pcdc/synthetic.hpp"
#include "pcdc/train.hpp"
#include "test_util.hpp"

using namespace pcdc;
using nn::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(const char* name, double budget_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " (over the " + std::to_string(static_cast<int>(budget_s)) + " s budget)";
  }
  std::printf("%s %-22s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::size_t plan_bytes(const std::vector<GofPlan>& plans) {
  std::size_t n = 2;
  for (const GofPlan& p : plans) {
    n += 1;
    for (int f = 0; f < p.frame_count; ++f) n += 4 + p.refs[static_cast<std::size_t>(f)].size();
  }
  return n;
}

Outcome coder_exactness() {
  test::Gen g(101);
  std::vector<CdfTable> tables;
  for (int t = 0; t < 64; ++t) {
    std::vector<double> pmf(static_cast<std::size_t>(g.integer(2, 400)));
    const double sigma = g.uniform(0.3, 30.0), mu = g.uniform(0, static_cast<double>(pmf.size()));
    for (std::size_t i = 0; i < pmf.size(); ++i) pmf[i] = std::exp(-std::abs(static_cast<double>(i) - mu) / sigma);
    tables.push_back(CdfTable::from_pmf(pmf));
  }
  const std::size_t n = 1000000;
  std::vector<std::uint16_t> which(n);
  std::vector<std::uint32_t> sym(n);
  double bound = 0;
  RangeEncoder enc;
  for (std::size_t i = 0; i < n; ++i) {
    which[i] = static_cast<std::uint16_t>(g.bits() % tables.size());
    const CdfTable& t = tables[which[i]];
    const auto u = static_cast<std::uint32_t>(g.bits() % kProbTotal);
    sym[i] = static_cast<std::uint32_t>(std::upper_bound(t.cum.begin(), t.cum.end(), u) - t.cum.begin() - 1);
    bound += t.bits(sym[i]);
    enc.encode(t, sym[i]);
  }
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < n; ++i) wrong += dec.decode(tables[which[i]]) != sym[i];
  const double bits = 8.0 * static_cast<double>(bytes.size());
  const double over = (bits - bound) / bound;
  return {wrong == 0 && over < 0.01,
          fmt("1e6 symbols, %.0f mismatches, %.4f%% over the bound", static_cast<double>(wrong), 100 * over)};
}

Outcome lossless_geometry() {
  test::Gen g(102);
  int bad = 0;
  double bits = 0, points = 0;
  for (int t = 0; t < 100; ++t) {
    const auto c = test::random_cloud(g, static_cast<std::size_t>(g.integer(1, 10000)), 1 << 10);
    const auto bytes = encode_coords(c, 10);
    bad += decode_coords(bytes) != c;
    bits += 8.0 * static_cast<double>(bytes.size());
    points += static_cast<double>(c.size());
  }
  return {bad == 0, fmt("100 clouds, %.0f mismatches, %.2f bits/point", bad, bits / points)};
}

Outcome gradient_suite() {
  test::Gen g(103);
  CodecConfig cfg;
  std::vector<std::pair<std::string, double>> errs;
  auto check = [&](const std::string& name, const std::function<nn::Var(nn::Graph&)>& fn,
                   std::vector<nn::Param*> wrt, std::size_t entries) {
    test::jitter_biases(wrt, g);
    nn::GradCheckOptions o;
    o.max_entries = entries;
    o.h = 1e-6;
    errs.emplace_back(name, nn::grad_check(fn, wrt, o));
  };

  nn::LinearLayer lin = nn::make_linear("lin", 6, 5, 1);
  nn::Param x{"x", g.tensor(7, 6)};
  auto lp = test::params_of(lin);
  lp.push_back(&x);
  check("linear", [&](nn::Graph& G) { return lin.forward(G, G.param(x)); }, lp, 0);

  nn::Mlp mlp = nn::make_mlp("mlp", {6, 12, 12, 4}, 2);
  auto mp = test::params_of(mlp);
  mp.push_back(&x);
  check("mlp", [&](nn::Graph& G) { return mlp.forward(G, G.param(x)); }, mp, 0);

  const auto anchors = test::random_cloud(g, 40, 8), refs = test::random_cloud(g, 48, 8);
  const KnnAdjacency adj = build_knn(anchors, refs, 6);
  nn::Param qf{"qf", g.tensor(anchors.size(), 8)}, rf{"rf", g.tensor(refs.size(), 8)};
  AlignParams al = make_align("al", 8, cfg);
  auto ap = test::params_of(al);
  ap.push_back(&rf);
  check("fmt_align",
        [&](nn::Graph& G) { return fmt_align(G, al, anchors, refs, G.param(rf), adj, 8.0).feats; }, ap, 0);

  const Tensor desc = anchor_descriptor(anchors, 8.0);
  FuseParams fu = make_fuse("fu", kDescriptorWidth, 8, 6, cfg);
  nn::Param bf{"bf", g.tensor(anchors.size(), 8)};
  auto fp = test::params_of(fu);
  fp.push_back(&qf);
  fp.push_back(&bf);
  check("bi_fuse", [&](nn::Graph& G) { return bi_fuse(G, fu, G.constant(desc), G.param(qf), G.param(bf)).feats; },
        fp, 0);

  CtrParams ct = make_ctr("ct", 8, cfg);
  auto cp = test::params_of(ct);
  cp.push_back(&qf);
  cp.push_back(&rf);
  check("ctr_refine",
        [&](nn::Graph& G) { return ctr_refine(G, ct, anchors, G.param(qf), refs, G.param(rf), adj).feats; }, cp,
        0);

  EntropyParams ep = make_entropy("ep", cfg);
  const std::size_t n = 24;
  nn::Param zp{"z", g.tensor(5, ep.hyper_width())}, causal{"y", g.tensor(n, ep.latent_width(), 2.0)},
      ctx{"ctx", g.tensor(n, static_cast<std::size_t>(cfg.context_width()))};
  auto parent = std::make_shared<std::vector<std::int64_t>>();
  for (std::size_t i = 0; i < n; ++i) parent->push_back(static_cast<std::int64_t>(i % 5));
  std::vector<nn::Param*> pp;
  ep.hyper_synthesis.for_each_param([&](nn::Param& p) { pp.push_back(&p); });
  ep.ar.for_each_param([&](nn::Param& p) { pp.push_back(&p); });
  ep.temporal.for_each_param([&](nn::Param& p) { pp.push_back(&p); });
  ep.fusion.for_each_param([&](nn::Param& p) { pp.push_back(&p); });
  pp.insert(pp.end(), {&zp, &causal, &ctx});
  check("predict_params",
        [&](nn::Graph& G) {
          const PriorTerms t = predict_params(G, ep, G.param(zp), parent, G.param(causal), G.param(ctx));
          return G.concat_cols({t.mu, t.sigma});
        },
        pp, 24);

  CodecConfig small = test::tiny_config(6);
  CodecWeights w = make_weights(small);
  const auto base = test::shell_cloud(g, 60, 9.0, 30);
  const FramePointCloud ref = make_frame(base, 0);
  const FramePointCloud cur = test::shifted(ref, {1, 0, 0}, 1);
  check("rd_loss",
        [&](nn::Graph& G) {
          std::mt19937_64 rng(3);
          ForwardOptions fo;
          fo.rng = &rng;
          const FrameTerms t = forward_frame(G, cur, FrameKind::kB, {&ref, &ref}, small, w, fo);
          return rd_loss(G, t.rate_bits, t.point_count, t.probs, t.targets, 5.0);
        },
        w.params(), 6);

  double worst = 0;
  std::string detail;
  for (const auto& [name, e] : errs) {
    worst = std::max(worst, e);
    detail += name + "=" + fmt("%.1e", e) + " ";
  }
  detail += fmt("(rd_loss frame: %.0f points)", static_cast<double>(cur.size()));
  return {worst < 1e-4 && cur.size() <= 64, detail};
}

Outcome scheduler_fidelity() {
  const GofPlan p = build_plan(16, true);
  bool ok = p.order == std::vector<int>{0, 8, 4, 12, 2, 6, 10, 14, 1, 3, 5, 7, 9, 11, 13, 15};
  ok &= p.refs[10] == std::vector<int>{8, 12};
  ok &= p.refs[14] == std::vector<int>{12};
  for (int size : {2, 4, 8, 16, 32}) {
    for (bool first : {true, false}) {
      const GofPlan q = build_plan(size, first);
      validate_plan(q);
      std::set<int> done;
      for (int f : q.order) {
        for (int r : q.refs[static_cast<std::size_t>(f)]) ok &= r == kPrevGofLast || done.count(r) == 1;
        done.insert(f);
      }
      for (const auto& stage : parallel_stages(q))
        for (int f : stage)
          for (int r : q.refs[static_cast<std::size_t>(f)])
            ok &= std::find(stage.begin(), stage.end(), r) == stage.end();
    }
  }
  return {ok, "order 0,8,4,12,2,6,10,14,odd; sizes 2..32 legal and stage-independent"};
}

Outcome probability_laws() {
  test::Gen g(104);
  CodecConfig cfg;
  double mask_err = 0, attn_err = 0, pmf_err = 0;
  for (int t = 0; t < 1000; ++t) {
    const int extent = g.integer(3, 10);
    const auto anchors = test::random_cloud(g, static_cast<std::size_t>(g.integer(1, 12)), extent);
    const auto refs = test::random_cloud(g, static_cast<std::size_t>(g.integer(1, 12)), extent);
    const std::size_t k = static_cast<std::size_t>(g.integer(1, 8));
    const KnnAdjacency adj = build_knn(anchors, refs, k);
    const std::size_t c = static_cast<std::size_t>(g.integer(1, 6));
    CodecConfig ct = cfg;
    ct.seed = g.bits();
    const AlignParams al = make_align("al", c, ct);
    const CtrParams cp = make_ctr("ct", c, ct);
    nn::Graph G(false);
    const nn::Var rf = G.constant(g.tensor(refs.size(), c, 3.0));
    const Tensor m = G.value(fmt_align(G, al, anchors, refs, rf, adj, 8.0).soft_mask);
    const Tensor a = G.value(
        ctr_refine(G, cp, anchors, G.constant(g.tensor(anchors.size(), c, 3.0)), refs, rf, adj).attention);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < k; ++j) s += m(i * k + j, 0);
      mask_err = std::max(mask_err, std::abs(s - 1.0));
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sa = 0;
        for (std::size_t j = 0; j < k; ++j) sa += a(i * k + j, ch);
        attn_err = std::max(attn_err, std::abs(sa - 1.0));
      }
    }
    const double mu = g.uniform(-10, 10), sigma = g.uniform(kSigmaMin, 20);
    const auto span = static_cast<int>(std::ceil(60 * sigma)) + 20;
    double s = 0;
    for (int n = -span; n <= span; ++n) s += nn::laplace_interval_mass(n - 0.5 - mu, n + 0.5 - mu, sigma);
    pmf_err = std::max(pmf_err, std::abs(s - 1.0));
  }
  return {mask_err < 1e-9 && attn_err < 1e-9 && pmf_err < 1e-12,
          fmt("max errors: mask %.1e, attention %.1e, pmf sum %.1e", mask_err, attn_err, pmf_err)};
}

// Weights overfit on the rigid pair, shared by the criteria that need them.
struct Trained {
  std::vector<FramePointCloud> pair;
  CodecConfig cfg;
  CodecWeights w;
  TrainTrace trace;
};

Trained& trained() {
  static Trained t = [] {
    Trained r;
    r.pair = rigid_pair(0);
    r.cfg.lambda = 15.0;
    r.w = make_weights(r.cfg);
    TrainOptions o;
    o.steps = 500;
    o.lambda = r.cfg.lambda;
    r.trace = train_overfit(r.pair[0], r.pair[1], r.cfg, r.w, o);
    return r;
  }();
  return t;
}

Outcome learning_sanity() {
  Trained& t = trained();
  const double ratio = t.trace.final_bce / t.trace.initial_bce;
  const EncodeResult a = encode_frame(t.pair[0], FrameKind::kI, {}, t.cfg, t.w);
  const ReferenceSet refs{&a.reconstruction, nullptr};
  const EncodeResult with = encode_frame(t.pair[1], FrameKind::kP, refs, t.cfg, t.w);
  CodecOptions zero;
  zero.zero_context = true;
  const EncodeResult without = encode_frame(t.pair[1], FrameKind::kP, refs, t.cfg, t.w, zero);
  const double p_with = d1(with.reconstruction.coords, t.pair[1].coords, t.cfg.peak).psnr;
  const double p_without = d1(without.reconstruction.coords, t.pair[1].coords, t.cfg.peak).psnr;
  return {ratio <= 0.10 && p_without < p_with,
          fmt("BCE %.4f -> ", t.trace.initial_bce) + fmt("%.5f (%.2f%%); ", t.trace.final_bce, 100 * ratio) +
              "frame-1 D1 " + format_psnr(p_with) + " dB with context, " + format_psnr(p_without) +
              " dB zeroed"};
}

Outcome residual_ordering() {
  Trained& t = trained();
  const EncodeResult a = encode_frame(t.pair[0], FrameKind::kI, {}, t.cfg, t.w);
  const EncodeResult b = encode_frame(t.pair[1], FrameKind::kP, {&a.reconstruction, nullptr}, t.cfg, t.w);
  const FeatureDiagnostics& d = b.diagnostics;
  const double vr = residual_stats(d.refined, d.truth).variance;
  const double va = residual_stats(d.aligned, d.truth).variance;
  const double vi = residual_stats(d.interpolated, d.truth).variance;
  return {vr < va && va < vi, fmt("variance refined %.4g < aligned %.4g < interpolated %.4g", vr, va, vi)};
}

Outcome closed_loop() {
  Trained& t = trained();
  SyntheticOptions so;
  so.frames = 16;
  const auto frames = synthetic_sequence(so);
  double mean_points = 0;
  for (const auto& f : frames) mean_points += static_cast<double>(f.size()) / 16.0;
  const EncodedSequence enc = encode_sequence(frames, t.cfg, t.w);
  const Stream s = demux(enc.bytes);
  const auto dec = decode_sequence(s, t.cfg, t.w);
  bool same = dec.size() == frames.size();
  for (std::size_t i = 0; same && i < dec.size(); ++i)
    same &= frame_checksum(dec[i]) == frame_checksum(enc.reconstructions[i]);
  for (const FrameReport& r : enc.reports) same &= r.reconstruction_checksum == frame_checksum(dec[r.frame_index]);
  std::size_t records = 0;
  double est = 0, actual = 0;
  for (const FrameReport& r : enc.reports) {
    records += kFrameHeaderBytes + r.c3_bytes + r.c4_bytes + r.f4_bytes + r.z_bytes;
    est += r.estimate_f4_bits;
    actual += 8.0 * static_cast<double>(r.f4_bytes);
  }
  const bool sums = records + kFixedHeaderBytes + plan_bytes(s.header.plans) == enc.bytes.size();
  const double gap = std::abs(actual - est) / actual;
  return {same && sums && gap < 0.02,
          fmt("%.0f points/frame, %.0f bytes, ", mean_points, static_cast<double>(enc.bytes.size())) +
              (same ? "checksums match, " : "checksum MISMATCH, ") + (sums ? "sections sum to file, " : "size MISMATCH, ") +
              fmt("F4 estimate %.0f vs %.0f bits (%.2f%%)", est, actual, 100 * gap)};
}

Outcome bd_rate_oracle() {
  const std::vector<RdPoint> a = {{0.1, 60.0}, {0.2, 64.0}, {0.4, 67.5}, {0.8, 70.0}, {1.6, 72.0}};
  auto b = a;
  for (auto& p : b) p.bpp *= 0.8;
  const double same = bd_rate(a, a), scaled = bd_rate(a, b);
  return {std::abs(same) < 0.0005 && std::abs(scaled + 20.0) <= 0.1,
          fmt("identical %.3f%%, x0.8 %.3f%%", same, scaled)};
}

Outcome metrics_oracle() {
  const std::vector<Coord> ref{{0, 0, 0}}, rec{{1, 0, 0}};
  const double p = d1(rec, ref, 1023.0).psnr;
  test::Gen g(105);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    const auto r = test::shell_cloud(g, static_cast<std::size_t>(g.integer(30, 500)), g.uniform(4, 20), 32);
    const auto c = test::random_cloud(g, static_cast<std::size_t>(g.integer(10, 500)), 64);
    violations += d2(c, r, 1023.0).mse > d1(c, r, 1023.0).mse;
  }
  return {std::abs(p - 64.97) <= 0.01 && violations == 0,
          fmt("single point D1 %.3f dB; D2 > D1 on %.0f of 100 clouds", p, violations)};
}

Outcome determinism() {
  Trained& t = trained();
  SyntheticOptions so;
  so.frames = 8;
  so.seed = 3;
  const auto frames = synthetic_sequence(so);
  SequenceOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const auto a = encode_sequence(frames, t.cfg, t.w, one).bytes;
  const auto b = encode_sequence(frames, t.cfg, t.w, many).bytes;
  const auto c = encode_sequence(frames, t.cfg, t.w, one).bytes;
  return {a == b && a == c, fmt("%.0f-byte stream, ", static_cast<double>(a.size())) +
                                (a == b && a == c ? "repeat and 4-thread runs identical" : "runs differ")};
}

}  // namespace

int main() {
  run("coder_exactness", 10, coder_exactness);
  run("lossless_geometry", 30, lossless_geometry);
  run("gradient_suite", 60, gradient_suite);
  run("scheduler_fidelity", 0, scheduler_fidelity);
  run("probability_laws", 0, probability_laws);
  run("learning_sanity", 0, learning_sanity);
  run("closed_loop", 0, closed_loop);
  run("residual_ordering", 0, residual_ordering);
  run("bd_rate_oracle", 0, bd_rate_oracle);
  run("metrics_oracle", 0, metrics_oracle);
  run("determinism", 0, determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures;
}
