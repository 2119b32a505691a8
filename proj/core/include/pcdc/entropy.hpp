#ifndef PCDC_ENTROPY_HPP_
#define PCDC_ENTROPY_HPP_

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pcdc/config.hpp"
#include "pcdc/nn/layers.hpp"
#include "pcdc/range_coder.hpp"
#include "pcdc/scale.hpp"

namespace pcdc {

inline constexpr double kSigmaMin = 0.11;
inline constexpr double kPmin = 1.0 / 65536.0;
inline constexpr std::size_t kFactorizedUnits = 4;

// Round half away from zero.
double quantize_value(double v);
nn::Tensor quantize(const nn::Tensor& y);
// Training surrogate: y + u with u ~ U(-1/2, 1/2).
nn::Tensor uniform_noise(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// Mass of [n - 1/2, n + 1/2] under Laplace(mu, sigma), floored at kPmin.
double laplace_pmf(double n, double mu, double sigma);

struct LaplaceParams {
  nn::Tensor mu;
  nn::Tensor sigma;
};

// Sum of -log2 laplace_pmf over all symbols.
double rate_estimate(const nn::Tensor& symbols, const LaplaceParams& params);

// Monotone per-channel CDF of the hyper latent; row c of `params` holds
// (a[U], b[U], log_scale[U]).
double factorized_cdf(std::span<const double> params, double x);
double factorized_pmf(std::span<const double> params, double n);
// Sum of -log2 factorized_pmf (floored at kPmin) over all entries.
double factorized_rate(const nn::Tensor& z_hat, const nn::Tensor& params);

struct EntropyParams {
  DownsampleBlock hyper_analysis;  // latent -> hyper latent, one stage coarser
  nn::Mlp hyper_synthesis;         // hyper latent -> C
  nn::Mlp ar;                      // window * C -> C
  nn::Mlp temporal;                // context -> C
  nn::Mlp fusion;                  // 3C -> (mu, log sigma)
  nn::Param factorized;            // hyper width x 3U
  std::size_t window = 8;

  std::size_t latent_width() const { return hyper_synthesis.out_width(); }
  std::size_t hyper_width() const { return hyper_synthesis.in_width(); }

  template <typename F>
  void for_each_param(F&& f) {
    hyper_analysis.for_each_param(f);
    hyper_synthesis.for_each_param(f);
    ar.for_each_param(f);
    temporal.for_each_param(f);
    fusion.for_each_param(f);
    f(factorized);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    hyper_analysis.for_each_param(f);
    hyper_synthesis.for_each_param(f);
    ar.for_each_param(f);
    temporal.for_each_param(f);
    fusion.for_each_param(f);
    f(factorized);
  }
};

EntropyParams make_entropy(const std::string& name, const CodecConfig& cfg);

struct PriorTerms {
  nn::Var mu;
  nn::Var sigma;
};

// (mu, sigma) for every latent row. `z_parent[i]` is the hyper-latent row
// covering latent row i; `causal` holds the decoded latent in Morton scan
// order (only rows before i influence row i); `context` is already pooled to
// the latent's coordinates.
PriorTerms predict_params(nn::Graph& g, const EntropyParams& p, nn::Var z_hat,
                          std::shared_ptr<const std::vector<std::int64_t>> z_parent,
                          nn::Var causal, nn::Var context);

// Decoder-side evaluation of the same prior one row at a time. Hyper and
// temporal branches are evaluated once; row i needs rows < i of the latent.
class SequentialPrior {
 public:
  SequentialPrior(const EntropyParams& p, const nn::Tensor& z_hat,
                  std::span<const std::int64_t> z_parent, const nn::Tensor& context);

  // Parameters of row `row`; `decoded` must hold exactly `row` rows so far.
  LaplaceParams next(const nn::Tensor& decoded, std::size_t row) const;

 private:
  const EntropyParams& p_;
  nn::Tensor hyper_;
  nn::Tensor temporal_;
};

// Laplace-coded symbols: a window of about ten scales around round(mu) plus
// two escape symbols followed by an Exp-Golomb distance.
void encode_laplace(RangeEncoder& enc, double symbol, double mu, double sigma);
double decode_laplace(RangeDecoder& dec, double mu, double sigma);
// Frozen 16-bit table the coder uses for (mu, sigma); exposed for tests.
CdfTable laplace_table(double mu, double sigma, std::int64_t* window_lo = nullptr);

void encode_factorized(RangeEncoder& enc, const nn::Tensor& z_hat, const nn::Tensor& params);
nn::Tensor decode_factorized(RangeDecoder& dec, std::size_t rows, const nn::Tensor& params);

}  // namespace pcdc

#endif  // PCDC_ENTROPY_HPP_
