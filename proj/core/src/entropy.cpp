#include "pcdc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/nn/prob.hpp"

namespace pcdc {

namespace {

constexpr std::int64_t kMaxHalfWidth = 200;
constexpr std::int64_t kFactorizedHalfWidth = 24;
constexpr double kMaxSymbol = 2147483647.0;

struct Window {
  std::int64_t lo;
  std::int64_t hi;
};

Window laplace_window(double mu, double sigma) {
  const auto center = static_cast<std::int64_t>(std::clamp(quantize_value(mu), -kMaxSymbol, kMaxSymbol));
  const auto half = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(10.0 * sigma)), 3,
                                             kMaxHalfWidth);
  return {center - half, center + half};
}

// Table over {escape low, lo..hi, escape high}.
CdfTable window_table(Window w, double tail_lo, double tail_hi, auto&& pmf) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>(w.hi - w.lo) + 3);
  p.push_back(std::max(tail_lo, 0.0));
  for (std::int64_t n = w.lo; n <= w.hi; ++n) p.push_back(pmf(n));
  p.push_back(std::max(tail_hi, 0.0));
  return CdfTable::from_pmf(p);
}

void encode_windowed(RangeEncoder& enc, const CdfTable& t, Window w, double symbol) {
  if (!(std::fabs(symbol) <= kMaxSymbol) || symbol != std::floor(symbol)) {
    fail(ErrorCode::kInvalidArgument, "entropy coder: symbol is not a codable integer");
  }
  const auto s = static_cast<std::int64_t>(symbol);
  if (s < w.lo) {
    enc.encode(t, 0);
    enc.encode_exp_golomb(static_cast<std::uint64_t>(w.lo - 1 - s));
  } else if (s > w.hi) {
    enc.encode(t, t.size() - 1);
    enc.encode_exp_golomb(static_cast<std::uint64_t>(s - w.hi - 1));
  } else {
    enc.encode(t, static_cast<std::size_t>(s - w.lo) + 1);
  }
}

double decode_windowed(RangeDecoder& dec, const CdfTable& t, Window w) {
  const std::size_t idx = dec.decode(t);
  if (idx == 0) {
    const std::uint64_t d = dec.decode_exp_golomb();
    if (d > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max())) {
      fail_decode(dec.position(), "entropy decoder: escaped value out of range");
    }
    return static_cast<double>(w.lo - 1 - static_cast<std::int64_t>(d));
  }
  if (idx == t.size() - 1) {
    const std::uint64_t d = dec.decode_exp_golomb();
    if (d > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max())) {
      fail_decode(dec.position(), "entropy decoder: escaped value out of range");
    }
    return static_cast<double>(w.hi + 1 + static_cast<std::int64_t>(d));
  }
  return static_cast<double>(w.lo + static_cast<std::int64_t>(idx) - 1);
}

}  // namespace

double quantize_value(double v) { return std::round(v); }

nn::Tensor quantize(const nn::Tensor& y) {
  nn::Tensor q = y;
  for (double& v : q.flat()) v = quantize_value(v);
  return q;
}

nn::Tensor uniform_noise(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  nn::Tensor t(rows, cols);
  for (double& v : t.flat()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  return t;
}

double laplace_pmf(double n, double mu, double sigma) {
  return std::max(nn::laplace_interval_mass(n - 0.5 - mu, n + 0.5 - mu, sigma), kPmin);
}

double rate_estimate(const nn::Tensor& symbols, const LaplaceParams& params) {
  if (!symbols.same_shape(params.mu) || !symbols.same_shape(params.sigma)) {
    fail(ErrorCode::kShapeMismatch, "rate_estimate: shape mismatch");
  }
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    bits -= std::log2(laplace_pmf(symbols[i], params.mu[i], params.sigma[i]));
  }
  return bits;
}

double factorized_cdf(std::span<const double> prm, double x) {
  const std::size_t u = prm.size() / 3;
  double amax = prm[0];
  for (std::size_t i = 1; i < u; ++i) amax = std::max(amax, prm[i]);
  double wsum = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < u; ++i) {
    const double w = std::exp(prm[i] - amax);
    wsum += w;
    acc += w * nn::stable_sigmoid(std::exp(prm[2 * u + i]) * (x - prm[u + i]));
  }
  return acc / wsum;
}

double factorized_pmf(std::span<const double> prm, double n) {
  return std::max(factorized_cdf(prm, n + 0.5) - factorized_cdf(prm, n - 0.5), kPmin);
}

double factorized_rate(const nn::Tensor& z_hat, const nn::Tensor& params) {
  if (params.rows() != z_hat.cols()) fail(ErrorCode::kShapeMismatch, "factorized_rate: widths");
  double bits = 0.0;
  for (std::size_t r = 0; r < z_hat.rows(); ++r) {
    for (std::size_t c = 0; c < z_hat.cols(); ++c) {
      bits -= std::log2(factorized_pmf(params.row(c), z_hat(r, c)));
    }
  }
  return bits;
}

EntropyParams make_entropy(const std::string& name, const CodecConfig& cfg) {
  const auto c = static_cast<std::size_t>(cfg.latent_width());
  const auto hz = static_cast<std::size_t>(cfg.hyper_width);
  const auto cctx = static_cast<std::size_t>(cfg.context_width());
  const auto w = static_cast<std::size_t>(cfg.ar_window);
  auto hid = [&cfg](std::size_t in) {
    return static_cast<std::size_t>(hidden_width(cfg, static_cast<int>(in)));
  };
  EntropyParams p{
      make_downsample(name + ".ha", c, hz, OutputAct::kNone, cfg),
      nn::make_mlp(name + ".hs", {hz, hid(hz), c}, cfg.seed),
      nn::make_mlp(name + ".ar", {w * c, hid(w * c), c}, cfg.seed),
      nn::make_mlp(name + ".tp", {cctx, hid(cctx), c}, cfg.seed),
      nn::make_mlp(name + ".pf", {3 * c, hid(3 * c), 2 * c}, cfg.seed),
      nn::Param{name + ".fz", nn::Tensor(hz, 3 * kFactorizedUnits)},
      w};
  static constexpr double kInitCenters[kFactorizedUnits] = {-3.0, -1.0, 1.0, 3.0};
  for (std::size_t r = 0; r < hz; ++r) {
    for (std::size_t u = 0; u < kFactorizedUnits; ++u) {
      p.factorized.value(r, kFactorizedUnits + u) = kInitCenters[u];
    }
  }
  return p;
}

namespace {

// Columns j*C .. j*C+C-1 hold row i - 1 - j of the causal latent.
nn::Var causal_window(nn::Graph& g, nn::Var causal, std::size_t window) {
  const std::size_t n = g.value(causal).rows();
  std::vector<nn::Var> parts;
  for (std::size_t j = 0; j < window; ++j) {
    auto idx = std::make_shared<std::vector<std::int64_t>>(n);
    for (std::size_t i = 0; i < n; ++i) {
      (*idx)[i] = static_cast<std::int64_t>(i) - 1 - static_cast<std::int64_t>(j);
    }
    parts.push_back(g.gather_rows(causal, idx));
  }
  return g.concat_cols(parts);
}

PriorTerms fuse_priors(nn::Graph& g, const EntropyParams& p, nn::Var hyper, nn::Var ar,
                       nn::Var temporal) {
  const std::size_t c = p.latent_width();
  const nn::Var out = p.fusion.forward(g, g.concat_cols({hyper, ar, temporal}));
  const nn::Var mu = g.slice_cols(out, 0, c);
  const nn::Var sigma = g.clamp_min(g.exp(g.slice_cols(out, c, c)), kSigmaMin);
  return PriorTerms{mu, sigma};
}

}  // namespace

PriorTerms predict_params(nn::Graph& g, const EntropyParams& p, nn::Var z_hat,
                          std::shared_ptr<const std::vector<std::int64_t>> z_parent,
                          nn::Var causal, nn::Var context) {
  const std::size_t n = g.value(causal).rows();
  if (z_parent->size() != n || g.value(context).rows() != n) {
    fail(ErrorCode::kScanOrderError, "predict_params: latent, hyper index and context disagree");
  }
  if (g.value(causal).cols() != p.latent_width()) {
    fail(ErrorCode::kShapeMismatch, "predict_params: latent width mismatch");
  }
  const nn::Var hyper = p.hyper_synthesis.forward(g, g.gather_rows(z_hat, z_parent));
  const nn::Var ar = p.ar.forward(g, causal_window(g, causal, p.window));
  const nn::Var temporal = p.temporal.forward(g, context);
  return fuse_priors(g, p, hyper, ar, temporal);
}

SequentialPrior::SequentialPrior(const EntropyParams& p, const nn::Tensor& z_hat,
                                 std::span<const std::int64_t> z_parent,
                                 const nn::Tensor& context)
    : p_(p) {
  if (z_parent.size() != context.rows()) {
    fail(ErrorCode::kScanOrderError, "SequentialPrior: hyper index and context disagree");
  }
  nn::Graph g(false);
  auto idx = std::make_shared<std::vector<std::int64_t>>(z_parent.begin(), z_parent.end());
  hyper_ = g.value(p.hyper_synthesis.forward(g, g.gather_rows(g.view(z_hat), idx)));
  temporal_ = g.value(p.temporal.forward(g, g.view(context)));
}

LaplaceParams SequentialPrior::next(const nn::Tensor& decoded, std::size_t row) const {
  const std::size_t c = p_.latent_width();
  if (decoded.rows() != row || (row > 0 && decoded.cols() != c) || row >= hyper_.rows()) {
    fail(ErrorCode::kScanOrderError, "SequentialPrior: rows must be decoded in scan order");
  }
  nn::Tensor window(1, p_.window * c);
  for (std::size_t j = 0; j < p_.window; ++j) {
    if (row < j + 1) break;
    const std::size_t src = row - 1 - j;
    for (std::size_t k = 0; k < c; ++k) window(0, j * c + k) = decoded(src, k);
  }
  nn::Graph g(false);
  const nn::Var ar = p_.ar.forward(g, g.constant(std::move(window)));
  const nn::Var h = g.constant(nn::slice_rows(hyper_, row, 1));
  const nn::Var t = g.constant(nn::slice_rows(temporal_, row, 1));
  const PriorTerms terms = fuse_priors(g, p_, h, ar, t);
  return LaplaceParams{g.value(terms.mu), g.value(terms.sigma)};
}

CdfTable laplace_table(double mu, double sigma, std::int64_t* window_lo) {
  if (!(sigma >= kSigmaMin) || !std::isfinite(mu) || !std::isfinite(sigma)) {
    fail(ErrorCode::kNonFinite, "laplace_table: invalid parameters");
  }
  const Window w = laplace_window(mu, sigma);
  if (window_lo) *window_lo = w.lo;
  const double tail_lo = nn::laplace_cdf(static_cast<double>(w.lo) - 0.5 - mu, sigma);
  const double tail_hi = 1.0 - nn::laplace_cdf(static_cast<double>(w.hi) + 0.5 - mu, sigma);
  return window_table(w, tail_lo, tail_hi, [&](std::int64_t n) {
    const double t = static_cast<double>(n) - mu;
    return nn::laplace_interval_mass(t - 0.5, t + 0.5, sigma);
  });
}

void encode_laplace(RangeEncoder& enc, double symbol, double mu, double sigma) {
  const CdfTable t = laplace_table(mu, sigma);
  encode_windowed(enc, t, laplace_window(mu, sigma), symbol);
}

double decode_laplace(RangeDecoder& dec, double mu, double sigma) {
  const CdfTable t = laplace_table(mu, sigma);
  return decode_windowed(dec, t, laplace_window(mu, sigma));
}

namespace {

CdfTable factorized_table(std::span<const double> prm) {
  const Window w{-kFactorizedHalfWidth, kFactorizedHalfWidth};
  const double tail_lo = factorized_cdf(prm, static_cast<double>(w.lo) - 0.5);
  const double tail_hi = 1.0 - factorized_cdf(prm, static_cast<double>(w.hi) + 0.5);
  return window_table(w, tail_lo, tail_hi, [&](std::int64_t n) {
    const auto x = static_cast<double>(n);
    return std::max(factorized_cdf(prm, x + 0.5) - factorized_cdf(prm, x - 0.5), 0.0);
  });
}

}  // namespace

void encode_factorized(RangeEncoder& enc, const nn::Tensor& z_hat, const nn::Tensor& params) {
  if (params.rows() != z_hat.cols()) fail(ErrorCode::kShapeMismatch, "encode_factorized: widths");
  std::vector<CdfTable> tables;
  for (std::size_t c = 0; c < params.rows(); ++c) tables.push_back(factorized_table(params.row(c)));
  const Window w{-kFactorizedHalfWidth, kFactorizedHalfWidth};
  for (std::size_t r = 0; r < z_hat.rows(); ++r) {
    for (std::size_t c = 0; c < z_hat.cols(); ++c) encode_windowed(enc, tables[c], w, z_hat(r, c));
  }
}

nn::Tensor decode_factorized(RangeDecoder& dec, std::size_t rows, const nn::Tensor& params) {
  std::vector<CdfTable> tables;
  for (std::size_t c = 0; c < params.rows(); ++c) tables.push_back(factorized_table(params.row(c)));
  const Window w{-kFactorizedHalfWidth, kFactorizedHalfWidth};
  nn::Tensor z(rows, params.rows());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < params.rows(); ++c) z(r, c) = decode_windowed(dec, tables[c], w);
  }
  return z;
}

}  // namespace pcdc
