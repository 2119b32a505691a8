#include "pcdc/nn/adam.hpp"

#include <cmath>

namespace pcdc::nn {

void Adam::step(std::span<Param* const> params, const GradMap& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (Param* p : params) {
    auto it = grads.find(p);
    if (it == grads.end() || it->second.empty()) continue;
    const Tensor& g = it->second;
    Moments& s = state_[p];
    if (s.m.empty()) {
      s.m = Tensor(g.rows(), g.cols());
      s.v = Tensor(g.rows(), g.cols());
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g[i];
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mh = s.m[i] / c1, vh = s.v[i] / c2;
      p->value[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
  }
}

}  // namespace pcdc::nn
