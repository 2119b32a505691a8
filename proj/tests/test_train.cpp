#include <cmath>

#include "doctest.h"
#include "pcdc/error.hpp"
#include "pcdc/train.hpp"
#include "test_util.hpp"

using namespace pcdc;

TEST_SUITE("train") {

TEST_CASE("short run lowers the loss and keeps the trace consistent") {
  const CodecConfig cfg = test::tiny_config();
  CodecWeights w = make_weights(cfg);
  const auto f = test::drifting_frames(1, 2, 250);
  TrainOptions o;
  o.steps = 30;
  o.lr = 5e-3;
  const TrainTrace t = train_overfit(f[0], f[1], cfg, w, o);
  REQUIRE(t.raw.size() == 30);
  CHECK(t.smoothed.size() == 30);
  CHECK(t.rate.size() == 30);
  CHECK(t.bce.size() == 30);
  for (std::size_t i = 0; i < t.raw.size(); ++i) {
    CHECK(std::isfinite(t.raw[i]));
    CHECK(t.rate[i] >= 0.0);
    CHECK(t.bce[i] > 0.0);
    if (i > 0) CHECK(t.smoothed[i] <= t.smoothed[i - 1]);
  }
  CHECK(t.final_bce < t.initial_bce);
  CHECK(w.hash() != make_weights(cfg).hash());
}

TEST_CASE("training is deterministic") {
  const CodecConfig cfg = test::tiny_config();
  const auto f = test::drifting_frames(2, 2, 200);
  TrainOptions o;
  o.steps = 5;
  CodecWeights a = make_weights(cfg), b = make_weights(cfg);
  const TrainTrace ta = train_overfit(f[0], f[1], cfg, a, o);
  const TrainTrace tb = train_overfit(f[0], f[1], cfg, b, o);
  CHECK(ta.raw == tb.raw);
  CHECK(a.hash() == b.hash());
  o.seed = 8;
  CodecWeights c = make_weights(cfg);
  train_overfit(f[0], f[1], cfg, c, o);
  CHECK(c.hash() != a.hash());
}

TEST_CASE("zero lambda trains distortion only") {
  const CodecConfig cfg = test::tiny_config();
  const auto f = test::drifting_frames(3, 2, 200);
  TrainOptions o;
  o.steps = 4;
  o.lambda = 0.0;
  o.aux_weight = 0.0;
  CodecWeights w = make_weights(cfg);
  const TrainTrace t = train_overfit(f[0], f[1], cfg, w, o);
  // three samples, each contributing its distortion
  for (std::size_t i = 0; i < t.raw.size(); ++i) CHECK(t.raw[i] == doctest::Approx(3.0 * t.bce[i]).epsilon(1e-9));
  o.lambda = -1.0;
  CHECK_THROWS_AS(train_overfit(f[0], f[1], cfg, w, o), Error);
}

TEST_CASE("eval distortion of identical frames is finite") {
  const CodecConfig cfg = test::tiny_config();
  const CodecWeights w = make_weights(cfg);
  const auto f = test::drifting_frames(4, 1, 200);
  const double a = eval_bce(f[0], f[0], cfg, w);
  const double b = eval_bce(f[0], f[0], cfg, w, true);
  CHECK(std::isfinite(a));
  CHECK(a > 0.0);
  CHECK(std::isfinite(b));
  CHECK(eval_bce(f[0], f[0], cfg, w) == a);
}

}
