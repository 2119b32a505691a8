#ifndef PCDC_TEST_UTIL_HPP_
#define PCDC_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "pcdc/config.hpp"
#include "pcdc/geometry.hpp"
#include "pcdc/nn/graph.hpp"
#include "pcdc/point_cloud.hpp"

namespace pcdc::test {

// Hand-rolled generators; std distributions differ between standard
// libraries, so everything goes through raw 64-bit draws.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  std::uint64_t bits() { return rng(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double unit() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  Coord coord(int extent) { return {integer(0, extent - 1), integer(0, extent - 1), integer(0, extent - 1)}; }
  nn::Tensor tensor(std::size_t r, std::size_t c, double scale = 1.0) {
    nn::Tensor t(r, c);
    for (double& v : t.flat()) v = uniform(-scale, scale);
    return t;
  }
};

// Unique Morton-sorted cloud of at most n points in [0, extent)^3.
inline std::vector<Coord> random_cloud(Gen& g, std::size_t n, int extent) {
  std::vector<Coord> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(g.coord(extent));
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  sort_morton(pts);
  return pts;
}

// Points on a blobby shell, closer to real surfaces than uniform noise.
inline std::vector<Coord> shell_cloud(Gen& g, std::size_t n, double radius, int centre) {
  std::vector<Coord> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = g.uniform(-1.0, 1.0), phi = g.uniform(0.0, 6.283185307179586);
    const double s = std::sqrt(1.0 - u * u);
    const double r = radius * (1.0 + 0.1 * std::sin(3.0 * phi));
    pts.push_back({centre + static_cast<int>(std::lround(r * s * std::cos(phi))),
                   centre + static_cast<int>(std::lround(r * s * std::sin(phi))),
                   centre + static_cast<int>(std::lround(r * u))});
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  sort_morton(pts);
  return pts;
}

inline FramePointCloud shifted(const FramePointCloud& f, Coord d, std::uint32_t index) {
  std::vector<Coord> c;
  for (const Coord& p : f.coords) c.push_back({p.x + d.x, p.y + d.y, p.z + d.z});
  return make_frame(std::move(c), index);
}

// Reference z-order comparison without building keys: the axis holding the
// most significant differing bit decides, x before y before z on equal bits.
inline bool zorder_less(const Coord& a, const Coord& b) {
  const std::uint32_t dx = static_cast<std::uint32_t>(a.x ^ b.x);
  const std::uint32_t dy = static_cast<std::uint32_t>(a.y ^ b.y);
  const std::uint32_t dz = static_cast<std::uint32_t>(a.z ^ b.z);
  auto less_msb = [](std::uint32_t p, std::uint32_t q) { return p < q && p < (p ^ q); };
  int axis = 0;
  std::uint32_t best = dx;
  if (less_msb(best, dy) || (best == 0 && dy != 0)) {
    axis = 1;
    best = dy;
  }
  if (less_msb(best, dz) || (best == 0 && dz != 0)) {
    axis = 2;
    best = dz;
  }
  if (best == 0) return false;
  const std::int32_t av = axis == 0 ? a.x : axis == 1 ? a.y : a.z;
  const std::int32_t bv = axis == 0 ? b.x : axis == 1 ? b.y : b.z;
  return av < bv;
}

// Gathers every Param of a module into a pointer list for grad_check.
template <typename M>
std::vector<nn::Param*> params_of(M& m) {
  std::vector<nn::Param*> out;
  m.for_each_param([&](nn::Param& p) { out.push_back(&p); });
  return out;
}

// Biases start at zero, so zero inputs put units exactly on the ReLU kink
// where central differences disagree with any one-sided derivative. Finite
// difference checks shift the biases off it first.
inline void jitter_biases(std::span<nn::Param* const> params, Gen& g, double scale = 0.05) {
  for (nn::Param* p : params) {
    if (p->name.size() < 2 || p->name.compare(p->name.size() - 2, 2, ".b") != 0) continue;
    for (double& v : p->value.flat()) v += g.uniform(-scale, scale);
  }
}

// Narrow model so whole-codec tests stay fast.
inline CodecConfig tiny_config(int bit_depth = 7) {
  CodecConfig cfg;
  cfg.bit_depth = bit_depth;
  cfg.feature_width = {1, 3, 4, 5, 6};
  cfg.hyper_width = 3;
  cfg.hidden_cap = 12;
  cfg.knn_k = 4;
  cfg.ctr_k = 3;
  cfg.ar_window = 2;
  cfg.gof_size = 4;
  return cfg;
}

// Shell frames drifting along x, sized for tiny_config.
inline std::vector<FramePointCloud> drifting_frames(std::uint64_t seed, std::size_t count,
                                                    std::size_t points = 400, double radius = 18.0) {
  Gen g(seed);
  const auto base = shell_cloud(g, points, radius, 60);
  std::vector<FramePointCloud> out;
  for (std::size_t t = 0; t < count; ++t) {
    out.push_back(shifted(make_frame(base, 0), {static_cast<int>(t), 0, static_cast<int>(t % 2)},
                          static_cast<std::uint32_t>(t)));
  }
  return out;
}

}  // namespace pcdc::test

#endif  // PCDC_TEST_UTIL_HPP_
