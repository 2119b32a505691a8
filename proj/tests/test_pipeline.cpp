#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pcdc/error.hpp"
#include "pcdc/nn/grad_check.hpp"
#include "pcdc/pipeline.hpp"
#include "pcdc/sequence.hpp"
#include "test_util.hpp"

using namespace pcdc;
using nn::Tensor;

namespace {

std::vector<Coord> coarsen_n(std::vector<Coord> c, int n) {
  for (int i = 0; i < n; ++i) c = coarsen(c);
  return c;
}

bool same_frame(const FramePointCloud& a, const FramePointCloud& b) {
  return a.frame_index == b.frame_index && a.coords == b.coords && a.feats == b.feats;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("I, P and B frames decode to the encoder's reconstruction") {
  const CodecConfig cfg = test::tiny_config();
  const CodecWeights w = make_weights(cfg);
  const auto frames = test::drifting_frames(1, 3);

  const EncodeResult i = encode_frame(frames[0], FrameKind::kI, {}, cfg, w);
  const EncodeResult p = encode_frame(frames[2], FrameKind::kP, {&i.reconstruction, nullptr}, cfg, w);
  const EncodeResult b =
      encode_frame(frames[1], FrameKind::kB, {&i.reconstruction, &p.reconstruction}, cfg, w);

  for (const auto* r : {&i, &p, &b}) {
    const std::uint32_t idx = r->payload.frame_index;
    const FramePointCloud& src = frames[idx];
    CHECK(r->payload.point_count == src.size());
    CHECK(r->reconstruction.size() == src.size());
    CHECK(r->diagnostics.c3 == coarsen_n(src.coords, 3));
    CHECK(r->payload.target_counts[0] == coarsen_n(src.coords, 2).size());
    CHECK(r->payload.target_counts[1] == coarsen_n(src.coords, 1).size());
    CHECK(r->payload.target_counts[2] == src.size());
    CHECK(r->estimate_f4_bits > 0.0);
    CHECK(r->estimate_z_bits > 0.0);
    CHECK(r->payload.section_bytes() ==
          r->payload.c3.size() + r->payload.c4.size() + r->payload.f4.size() + r->payload.z.size());
    const auto& rc = r->reconstruction.coords;
    CHECK(std::is_sorted(rc.begin(), rc.end(), test::zorder_less));
    // every kept point descends from a decoded stage-3 point
    const auto up = coarsen_n(rc, 3);
    CHECK(std::includes(r->diagnostics.c3.begin(), r->diagnostics.c3.end(), up.begin(), up.end(),
                        test::zorder_less));
  }
  const ReferenceSet none{};
  CHECK(same_frame(decode_frame(i.payload, none, cfg, w), i.reconstruction));
  CHECK(same_frame(decode_frame(p.payload, {&i.reconstruction, nullptr}, cfg, w), p.reconstruction));
  FeatureDiagnostics d;
  CHECK(same_frame(decode_frame(b.payload, {&i.reconstruction, &p.reconstruction}, cfg, w, {}, &d),
                   b.reconstruction));
  CHECK(d.context_checksum == b.diagnostics.context_checksum);
  CHECK(d.adjacency_checksum == b.diagnostics.adjacency_checksum);
}

TEST_CASE("encoding is deterministic") {
  const CodecConfig cfg = test::tiny_config();
  const CodecWeights w = make_weights(cfg);
  const auto frames = test::drifting_frames(2, 2);
  const EncodeResult a = encode_frame(frames[1], FrameKind::kP, {&frames[0], nullptr}, cfg, w);
  const EncodeResult b = encode_frame(frames[1], FrameKind::kP, {&frames[0], nullptr}, cfg, w);
  CHECK(a.payload.c3 == b.payload.c3);
  CHECK(a.payload.c4 == b.payload.c4);
  CHECK(a.payload.f4 == b.payload.f4);
  CHECK(a.payload.z == b.payload.z);
  CHECK(frame_checksum(a.reconstruction) == frame_checksum(b.reconstruction));
}

TEST_CASE("missing references are a scheduling error") {
  const CodecConfig cfg = test::tiny_config();
  const CodecWeights w = make_weights(cfg);
  const auto frames = test::drifting_frames(3, 2);
  CHECK(code_of([&] { encode_frame(frames[1], FrameKind::kP, {}, cfg, w); }) == ErrorCode::kSchedulingError);
  CHECK(code_of([&] { encode_frame(frames[1], FrameKind::kB, {&frames[0], nullptr}, cfg, w); }) ==
        ErrorCode::kSchedulingError);
  const EncodeResult p = encode_frame(frames[1], FrameKind::kP, {&frames[0], nullptr}, cfg, w);
  CHECK(code_of([&] { decode_frame(p.payload, {}, cfg, w); }) == ErrorCode::kSchedulingError);
}

TEST_CASE("damaged payloads are decode errors naming the frame") {
  const CodecConfig cfg = test::tiny_config();
  const CodecWeights w = make_weights(cfg);
  const auto frames = test::drifting_frames(4, 1);
  const EncodeResult r = encode_frame(frames[0], FrameKind::kI, {}, cfg, w);
  FramePayload bad = r.payload;
  bad.point_count += 1;
  try {
    decode_frame(bad, {}, cfg, w);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDecodeError);
    CHECK(std::string(e.what()).find("frame 0") != std::string::npos);
  }
  FramePayload cut = r.payload;
  cut.c4.resize(cut.c4.size() / 2);
  CHECK(code_of([&] { decode_frame(cut, {}, cfg, w); }) == ErrorCode::kDecodeError);
  FramePayload none = r.payload;
  none.f4.clear();
  none.z.clear();
  CHECK(code_of([&] { decode_frame(none, {}, cfg, w); }) == ErrorCode::kDecodeError);
}

TEST_CASE("zero-context ablation round trips") {
  const CodecConfig cfg = test::tiny_config();
  const CodecWeights w = make_weights(cfg);
  const auto frames = test::drifting_frames(5, 2);
  CodecOptions z;
  z.zero_context = true;
  const EncodeResult r = encode_frame(frames[1], FrameKind::kP, {&frames[0], nullptr}, cfg, w, z);
  CHECK(same_frame(decode_frame(r.payload, {&frames[0], nullptr}, cfg, w, z), r.reconstruction));
}

TEST_CASE("rate-distortion loss at one half") {
  nn::Graph g;
  const std::size_t n = 50;
  test::Gen gen(6);
  std::vector<nn::Var> probs;
  std::vector<std::shared_ptr<const Tensor>> targets;
  for (std::size_t s = 0; s < 3; ++s) {
    probs.push_back(g.constant(Tensor(10 * (s + 1), 8, 0.5)));
    auto t = std::make_shared<Tensor>(10 * (s + 1), 8);
    for (double& v : t->flat()) v = static_cast<double>(gen.bits() & 1);
    targets.push_back(t);
  }
  const nn::Var rate = g.constant(Tensor(1, 1, 123.0));
  const double lambda = 8.0;
  const double loss = g.value(rd_loss(g, rate, n, probs, targets, lambda))[0];
  CHECK(loss == doctest::Approx(123.0 / 50.0 + lambda * std::log(2.0)).epsilon(1e-12));
  CHECK(g.value(distortion(g, probs, targets))[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // clamped probabilities stay finite
  std::vector<nn::Var> hard{g.constant(Tensor(2, 8, 0.0)), g.constant(Tensor(2, 8, 1.0)),
                            g.constant(Tensor(2, 8, 0.0))};
  auto ones = std::make_shared<Tensor>(2, 8, 1.0);
  std::vector<std::shared_ptr<const Tensor>> ht{ones, ones, ones};
  const double d = g.value(distortion(g, hard, ht))[0];
  CHECK(std::isfinite(d));
  CHECK(d == doctest::Approx(-2.0 / 3.0 * std::log(kBceClamp)).epsilon(1e-7));
}

TEST_CASE("rate-distortion loss gradient on a small frame") {
  CodecConfig cfg = test::tiny_config(6);
  CodecWeights w = make_weights(cfg);
  test::Gen gen(7);
  test::jitter_biases(w.params(), gen);
  const auto base = test::shell_cloud(gen, 60, 9.0, 30);
  REQUIRE(base.size() <= 64);
  const FramePointCloud ref = make_frame(base, 0);
  const FramePointCloud cur = test::shifted(ref, {1, 0, 0}, 1);
  std::vector<nn::Param*> wrt;
  w.entropy.fusion.for_each_param([&](nn::Param& p) { wrt.push_back(&p); });
  w.decoder.mix.for_each_param([&](nn::Param& p) { wrt.push_back(&p); });
  w.up[2].for_each_param([&](nn::Param& p) { wrt.push_back(&p); });
  w.latent.for_each_param([&](nn::Param& p) { wrt.push_back(&p); });
  w.align.pred.for_each_param([&](nn::Param& p) { wrt.push_back(&p); });
  nn::GradCheckOptions o;
  o.max_entries = 4;
  const double err = nn::grad_check(
      [&](nn::Graph& g) {
        std::mt19937_64 rng(3);
        ForwardOptions fo;
        fo.rng = &rng;
        const FrameTerms t = forward_frame(g, cur, FrameKind::kP, {&ref, nullptr}, cfg, w, fo);
        return rd_loss(g, t.rate_bits, t.point_count, t.probs, t.targets, 5.0);
      },
      wrt, o);
  CHECK(err < 1e-4);
}

}
