#include "pcdc/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/nn/adam.hpp"
#include "pcdc/pipeline.hpp"

namespace pcdc {

namespace {

struct Sample {
  const FramePointCloud* cur;
  FrameKind kind;
  ReferenceSet refs;
};

}  // namespace

double eval_bce(const FramePointCloud& cur, const FramePointCloud& ref, const CodecConfig& cfg,
                const CodecWeights& w, bool zero_context) {
  nn::Graph g(false);
  ForwardOptions fo;
  fo.training = false;
  fo.zero_context = zero_context;
  const FrameTerms t = forward_frame(g, cur, FrameKind::kP, ReferenceSet{&ref, nullptr}, cfg, w, fo);
  return g.value(distortion(g, t.probs, t.targets))[0];
}

TrainTrace train_overfit(const FramePointCloud& a, const FramePointCloud& b,
                         const CodecConfig& cfg, CodecWeights& w, const TrainOptions& opts) {
  if (opts.steps < 1) fail(ErrorCode::kInvalidArgument, "train_overfit: steps must be >= 1");
  if (opts.lambda < 0.0) fail(ErrorCode::kInvalidArgument, "train_overfit: negative lambda");
  std::mt19937_64 rng(opts.seed);
  nn::Adam adam(opts.lr);
  const std::vector<nn::Param*> params = w.params();
  const std::vector<Sample> samples = {
      {&a, FrameKind::kI, {}},
      {&b, FrameKind::kP, {&a, nullptr}},
      {&b, FrameKind::kB, {&a, &a}},
  };
  // A zero lambda trains distortion only; the warm-up would add rate.
  const int warmup = opts.lambda > 0.0
                         ? static_cast<int>(std::floor(opts.warmup_fraction * opts.steps))
                         : 0;

  TrainTrace trace;
  trace.initial_bce = eval_bce(b, a, cfg, w);
  double ema = 0.0;
  for (int step = 0; step < opts.steps; ++step) {
    const double lambda = step < warmup ? opts.warmup_lambda : opts.lambda;
    nn::Graph g(true);
    ForwardOptions fo;
    fo.training = true;
    fo.rng = &rng;
    nn::Var loss;
    double rate = 0.0, bce = 0.0;
    for (const Sample& s : samples) {
      const FrameTerms t = forward_frame(g, *s.cur, s.kind, s.refs, cfg, w, fo);
      const nn::Var d = distortion(g, t.probs, t.targets);
      const nn::Var r = g.scale(t.rate_bits, 1.0 / static_cast<double>(t.point_count));
      nn::Var l = lambda > 0.0 ? g.add(r, g.scale(d, lambda)) : d;
      if (opts.aux_weight > 0.0) {
        const nn::Var aux = g.add(g.mse(t.aligned3, t.truth3),
                                 g.scale(g.mse(t.refined3, t.truth3), opts.aux_refined_scale));
        l = g.add(l, g.scale(aux, opts.aux_weight));
      }
      loss = loss.valid() ? g.add(loss, l) : l;
      rate += g.value(r)[0];
      bce += g.value(d)[0] / static_cast<double>(samples.size());
    }
    const double v = g.value(loss)[0];
    if (!std::isfinite(v)) {
      fail(ErrorCode::kTrainingDiverged, "train_overfit: loss is not finite at step " +
                                             std::to_string(step));
    }
    g.backward(loss);
    nn::GradMap grads;
    g.accumulate(grads);
    adam.step(params, grads);

    ema = step == 0 ? v : 0.9 * ema + 0.1 * v;
    trace.raw.push_back(v);
    trace.smoothed.push_back(trace.smoothed.empty() ? ema : std::min(trace.smoothed.back(), ema));
    trace.rate.push_back(rate);
    trace.bce.push_back(bce);
  }
  trace.final_bce = eval_bce(b, a, cfg, w);
  return trace;
}

}  // namespace pcdc
