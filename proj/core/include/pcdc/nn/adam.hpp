#ifndef PCDC_NN_ADAM_HPP_
#define PCDC_NN_ADAM_HPP_

#include <span>
#include <unordered_map>

#include "pcdc/nn/graph.hpp"

namespace pcdc::nn {

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  int steps() const { return t_; }

  // One bias-corrected update; params without a gradient entry are skipped.
  void step(std::span<Param* const> params, const GradMap& grads);

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::unordered_map<const Param*, Moments> state_;
};

}  // namespace pcdc::nn

#endif  // PCDC_NN_ADAM_HPP_
