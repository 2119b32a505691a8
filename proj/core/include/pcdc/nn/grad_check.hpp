#ifndef PCDC_NN_GRAD_CHECK_HPP_
#define PCDC_NN_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <span>

#include "pcdc/nn/graph.hpp"

namespace pcdc::nn {

struct GradCheckOptions {
  double h = 1e-5;
  // Entries sampled per tensor; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 1;
};

// Builds the map once on a recording graph, backpropagates, then compares
// every (sampled) entry of every tensor in `wrt` against central differences.
// Inputs are checked the same way: wrap them in a Param. Non-scalar outputs
// are reduced with a fixed random projection. Returns
// max |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<Var(Graph&)>& fn, std::span<Param* const> wrt,
                  const GradCheckOptions& opts = {});

}  // namespace pcdc::nn

#endif  // PCDC_NN_GRAD_CHECK_HPP_
