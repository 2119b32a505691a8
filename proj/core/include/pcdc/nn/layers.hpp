#ifndef PCDC_NN_LAYERS_HPP_
#define PCDC_NN_LAYERS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcdc/nn/graph.hpp"

namespace pcdc::nn {

// Deterministic stream for parameter initialization, keyed by the global seed
// and the parameter's name so adding a layer never reshuffles the others.
class InitRng {
 public:
  InitRng(std::uint64_t seed, const std::string& stream);
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

struct LinearLayer {
  Param weight;  // out x in
  Param bias;    // 1 x out

  std::size_t in_width() const { return weight.value.cols(); }
  std::size_t out_width() const { return weight.value.rows(); }
  Var forward(Graph& g, Var x) const;

  template <typename F>
  void for_each_param(F&& f) {
    f(weight);
    f(bias);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    f(weight);
    f(bias);
  }
};

// Weights uniform in +-sqrt(1/in), zero bias.
LinearLayer make_linear(const std::string& name, std::size_t in, std::size_t out,
                        std::uint64_t seed);
LinearLayer identity_linear(const std::string& name, std::size_t width);
LinearLayer zero_linear(const std::string& name, std::size_t in, std::size_t out);

// Affine layers with ReLU in between; nothing after the last.
struct Mlp {
  std::vector<LinearLayer> layers;

  std::size_t in_width() const { return layers.front().in_width(); }
  std::size_t out_width() const { return layers.back().out_width(); }
  Var forward(Graph& g, Var x) const;

  template <typename F>
  void for_each_param(F&& f) {
    for (auto& l : layers) l.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    for (const auto& l : layers) l.for_each_param(f);
  }
};

// widths = {in, hidden..., out}.
Mlp make_mlp(const std::string& name, std::span<const std::size_t> widths, std::uint64_t seed);
Mlp make_mlp(const std::string& name, std::initializer_list<std::size_t> widths,
             std::uint64_t seed);

struct MlpResult {
  Tensor y;
  Graph tape;
  Var input;
  Var output;
};

// Standalone evaluation that keeps the tape for a later backward pass.
MlpResult forward(const Mlp& mlp, const Tensor& x);

// Max-subtracted softmax of one vector.
std::vector<double> softmax(std::span<const double> v);

}  // namespace pcdc::nn

#endif  // PCDC_NN_LAYERS_HPP_
