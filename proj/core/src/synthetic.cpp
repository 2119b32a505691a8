#include "pcdc/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "pcdc/error.hpp"

namespace pcdc {

namespace {

double unit(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

struct Shape {
  double radius;
  double phase_a, phase_b;
};

// Fibonacci-sphere samples of the bumpy surface, about 4 per unit area.
std::vector<std::array<double, 3>> surface(const Shape& s, double t, const SyntheticOptions& o) {
  const double area = 4.0 * std::numbers::pi * s.radius * s.radius;
  const auto m = static_cast<std::size_t>(area * 4.0);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double centre = std::ldexp(1.0, o.bit_depth - 1);
  std::vector<std::array<double, 3>> pts;
  pts.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    const double rho = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    const double theta = std::acos(z);
    const double r = s.radius * (1.0 + 0.12 * std::sin(3.0 * theta + s.phase_a) *
                                           std::cos(2.0 * phi + s.phase_b));
    double x = r * rho * std::cos(phi), y = r * rho * std::sin(phi), w = r * z;
    x += o.warp_amplitude * std::sin(2.0 * std::numbers::pi * (y / o.warp_period + 0.1 * t));
    pts.push_back({centre + x + t * o.shift[0], centre + y + t * o.shift[1],
                   centre + w + t * o.shift[2]});
  }
  return pts;
}

}  // namespace

std::vector<FramePointCloud> synthetic_sequence(const SyntheticOptions& opts) {
  if (opts.radius <= 1.0) fail(ErrorCode::kInvalidArgument, "synthetic: radius too small");
  std::uint64_t s = opts.seed;
  const Shape shape{opts.radius, 2.0 * std::numbers::pi * unit(s), 2.0 * std::numbers::pi * unit(s)};
  std::vector<FramePointCloud> out;
  for (std::size_t f = 0; f < opts.frames; ++f) {
    const auto pts = surface(shape, static_cast<double>(f), opts);
    out.push_back(voxelize(pts, opts.bit_depth, static_cast<std::uint32_t>(f)));
    out.back().feats = nn::Tensor(out.back().size(), 1, 1.0);
  }
  return out;
}

std::vector<FramePointCloud> rigid_pair(std::uint64_t seed, double radius) {
  SyntheticOptions o;
  o.frames = 2;
  o.radius = radius;
  o.warp_amplitude = 0.0;
  o.seed = seed;
  return synthetic_sequence(o);
}

}  // namespace pcdc
