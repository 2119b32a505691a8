#ifndef PCDC_SYNTHETIC_HPP_
#define PCDC_SYNTHETIC_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "pcdc/point_cloud.hpp"

namespace pcdc {

// Bumpy closed surface moving through the grid. Frame t is the base shape
// shifted by t * shift and warped by a travelling sine along x.
struct SyntheticOptions {
  std::size_t frames = 16;
  double radius = 12.5;
  std::array<double, 3> shift = {1.0, 0.5, 0.0};
  double warp_amplitude = 0.8;
  double warp_period = 20.0;
  int bit_depth = 10;
  std::uint64_t seed = 0;
};

std::vector<FramePointCloud> synthetic_sequence(const SyntheticOptions& opts);

// Two frames related by a pure translation.
std::vector<FramePointCloud> rigid_pair(std::uint64_t seed = 0, double radius = 12.5);

}  // namespace pcdc

#endif  // PCDC_SYNTHETIC_HPP_
