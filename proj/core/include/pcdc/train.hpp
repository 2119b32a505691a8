#ifndef PCDC_TRAIN_HPP_
#define PCDC_TRAIN_HPP_

#include <cstdint>
#include <vector>

#include "pcdc/config.hpp"
#include "pcdc/model.hpp"
#include "pcdc/point_cloud.hpp"

namespace pcdc {

struct TrainOptions {
  int steps = 500;
  double lambda = 15.0;
  std::uint64_t seed = 7;
  double lr = 2e-3;
  // Fraction of steps run at warmup_lambda before switching to lambda.
  double warmup_fraction = 0.1;
  double warmup_lambda = 30.0;
  // Weight of the stage-3 feature matching terms (aligned and refined).
  double aux_weight = 10.0;
  // Extra factor on the refined term of the matching loss.
  double aux_refined_scale = 3.0;
};

struct TrainTrace {
  std::vector<double> raw;       // loss per step
  std::vector<double> smoothed;  // running minimum of an EMA of raw; non-increasing
  std::vector<double> rate;      // bits per point per step (sum over samples)
  std::vector<double> bce;       // distortion per step (mean over samples)
  // Distortion of P(b|a) with rounding instead of noise, before and after.
  double initial_bce = 0.0;
  double final_bce = 0.0;
};

// Overfits `w` on one frame pair. Each step trains the I-frame a, the
// P-frame b predicted from a, and b as a B-frame with a on both sides.
// Throws kTrainingDiverged on a non-finite loss.
TrainTrace train_overfit(const FramePointCloud& a, const FramePointCloud& b,
                         const CodecConfig& cfg, CodecWeights& w, const TrainOptions& opts = {});

// Distortion of `cur` coded as a P-frame from `ref` (rounded latents).
double eval_bce(const FramePointCloud& cur, const FramePointCloud& ref, const CodecConfig& cfg,
                const CodecWeights& w, bool zero_context = false);

}  // namespace pcdc

#endif  // PCDC_TRAIN_HPP_
