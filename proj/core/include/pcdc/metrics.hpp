#ifndef PCDC_METRICS_HPP_
#define PCDC_METRICS_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pcdc/geometry.hpp"
#include "pcdc/nn/tensor.hpp"
#include "pcdc/sequence.hpp"

namespace pcdc {

// PSNR of identical clouds.
inline constexpr double kLosslessPsnr = std::numeric_limits<double>::infinity();

struct Distortion {
  double mse_rec_to_ref = 0.0;
  double mse_ref_to_rec = 0.0;
  double mse = 0.0;  // max of the two directions
  double psnr = kLosslessPsnr;
  bool lossless() const { return mse == 0.0; }
};

// Point-to-point. Throws kEmptyCloud if either side is empty.
Distortion d1(std::span<const Coord> rec, std::span<const Coord> ref, double peak);
// Point-to-plane with 12-NN PCA normals estimated on ref.
Distortion d2(std::span<const Coord> rec, std::span<const Coord> ref, double peak);
double psnr_from_mse(double mse, double peak);

// Unit normals of `cloud` from the smallest principal axis of each point's
// k nearest neighbours, oriented away from the cloud centroid. Rank-deficient
// neighbourhoods get a zero vector.
std::vector<std::array<double, 3>> estimate_normals(std::span<const Coord> cloud, std::size_t k = 12);

struct RdPoint {
  double bpp = 0.0;
  double psnr = 0.0;
};

// Bjontegaard delta rate of b against a in percent: cubic fits of ln(bpp) as
// a function of PSNR, averaged over the shared PSNR interval. Needs at least
// four points per curve; throws kNoOverlap when the intervals are disjoint.
double bd_rate(std::span<const RdPoint> a, std::span<const RdPoint> b);

// Reads "bpp,psnr" rows; a first line that does not parse is a header.
std::vector<RdPoint> read_curve_csv(const std::string& path);

struct ResidualStats {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double lo = 0.0, hi = 0.0;
  std::vector<std::uint64_t> histogram;  // values outside [lo, hi) go to the end bins
};

ResidualStats residual_stats(const nn::Tensor& estimate, const nn::Tensor& truth,
                             std::size_t bins = 41, double range = 2.0);

struct FrameQuality {
  std::uint32_t frame_index = 0;
  double d1_psnr = kLosslessPsnr;
  double d2_psnr = kLosslessPsnr;
};

// Formats a PSNR; the lossless sentinel prints as "lossless".
std::string format_psnr(double psnr);

// One row per coded frame: bits per point by section, their fractions and
// the frame's quality when given (matched by frame index).
void write_composition_csv(std::ostream& out, std::span<const FrameReport> reports,
                           std::span<const FrameQuality> quality = {});
void write_quality_csv(std::ostream& out, std::span<const FrameQuality> quality);
// Versioned JSON ("pcdc.report/1") with per-frame composition, quality and
// stage-3 residual histograms.
void write_report_json(std::ostream& out, std::span<const FrameReport> reports,
                       std::span<const FrameQuality> quality);

}  // namespace pcdc

#endif  // PCDC_METRICS_HPP_
