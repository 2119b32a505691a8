#include "pcdc/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "pcdc/error.hpp"
#include "pcdc/hash.hpp"

namespace pcdc::nn {

namespace {

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

InitRng::InitRng(std::uint64_t seed, const std::string& stream) {
  Fnv1a h;
  h.update_u64(seed);
  h.update(stream);
  state_ = h.digest();
}

double InitRng::uniform(double lo, double hi) {
  // 53 random mantissa bits; std::uniform_real_distribution is not pinned
  // down across standard libraries.
  const double u = static_cast<double>(splitmix(state_) >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Var LinearLayer::forward(Graph& g, Var x) const {
  if (g.value(x).cols() != in_width()) {
    fail(ErrorCode::kShapeMismatch, weight.name + ": input width " +
                                        std::to_string(g.value(x).cols()) + ", expected " +
                                        std::to_string(in_width()));
  }
  return g.linear(x, g.param(weight), g.param(bias));
}

LinearLayer make_linear(const std::string& name, std::size_t in, std::size_t out,
                        std::uint64_t seed) {
  LinearLayer l{{name + ".w", Tensor(out, in)}, {name + ".b", Tensor(1, out)}};
  InitRng rng(seed, name);
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  for (double& v : l.weight.value.flat()) v = rng.uniform(-bound, bound);
  return l;
}

LinearLayer identity_linear(const std::string& name, std::size_t width) {
  LinearLayer l{{name + ".w", Tensor(width, width)}, {name + ".b", Tensor(1, width)}};
  for (std::size_t i = 0; i < width; ++i) l.weight.value(i, i) = 1.0;
  return l;
}

LinearLayer zero_linear(const std::string& name, std::size_t in, std::size_t out) {
  return LinearLayer{{name + ".w", Tensor(out, in)}, {name + ".b", Tensor(1, out)}};
}

Var Mlp::forward(Graph& g, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(g, x);
    if (i + 1 < layers.size()) x = g.relu(x);
  }
  return x;
}

Mlp make_mlp(const std::string& name, std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) fail(ErrorCode::kInvalidArgument, name + ": mlp needs >= 2 widths");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(
        make_linear(name + "." + std::to_string(i), widths[i], widths[i + 1], seed));
  }
  return m;
}

Mlp make_mlp(const std::string& name, std::initializer_list<std::size_t> widths,
             std::uint64_t seed) {
  return make_mlp(name, std::span<const std::size_t>(widths.begin(), widths.size()), seed);
}

MlpResult forward(const Mlp& mlp, const Tensor& x) {
  MlpResult r;
  r.input = r.tape.constant(x);
  r.output = mlp.forward(r.tape, r.input);
  r.y = r.tape.value(r.output);
  return r;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& o : out) o /= total;
  return out;
}

}  // namespace pcdc::nn
