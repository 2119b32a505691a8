#include "pcdc/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pcdc/error.hpp"
#include "pcdc/nn/layers.hpp"

namespace pcdc::nn {

namespace {

Tensor projection(const Tensor& shape_of, std::uint64_t seed) {
  Tensor p(shape_of.rows(), shape_of.cols());
  InitRng rng(seed, "grad_check.projection");
  for (double& v : p.flat()) v = rng.uniform(-1.0, 1.0);
  return p;
}

double project(const Tensor& y, const Tensor& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * p[i];
  return s;
}

double evaluate(const std::function<Var(Graph&)>& fn, const Tensor& proj) {
  Graph g(false);
  const Tensor& y = g.value(fn(g));
  if (!y.all_finite()) fail(ErrorCode::kNonFinite, "grad_check: non-finite forward value");
  if (!y.same_shape(proj)) fail(ErrorCode::kShapeMismatch, "grad_check: output shape changed");
  return project(y, proj);
}

}  // namespace

double grad_check(const std::function<Var(Graph&)>& fn, std::span<Param* const> wrt,
                  const GradCheckOptions& opts) {
  if (!(opts.h >= 1e-7 && opts.h <= 1e-3)) {
    fail(ErrorCode::kInvalidArgument, "grad_check: step must lie in [1e-7, 1e-3]");
  }
  Graph g;
  const Var out = fn(g);
  const Tensor& y = g.value(out);
  if (!y.all_finite()) fail(ErrorCode::kNonFinite, "grad_check: non-finite forward value");
  const Tensor proj = y.size() == 1 ? Tensor(1, 1, 1.0) : projection(y, opts.seed);
  g.backward(out, proj);

  std::mt19937_64 pick(opts.seed);
  double worst = 0.0;
  for (Param* p : wrt) {
    const Tensor analytic = g.param_grad(*p);
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (opts.max_entries > 0 && idx.size() > opts.max_entries) {
      for (std::size_t i = 0; i < opts.max_entries; ++i) {
        std::swap(idx[i], idx[i + pick() % (idx.size() - i)]);
      }
      idx.resize(opts.max_entries);
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      p->value[i] = saved + opts.h;
      const double up = evaluate(fn, proj);
      p->value[i] = saved - opts.h;
      const double down = evaluate(fn, proj);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace pcdc::nn
