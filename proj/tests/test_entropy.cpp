#include <cmath>

#include "doctest.h"
#include "pcdc/entropy.hpp"
#include "pcdc/error.hpp"
#include "pcdc/nn/prob.hpp"
#include "test_util.hpp"

using namespace pcdc;
using nn::Tensor;

namespace {

// Simpson integral of the Laplace density over [a, b].
double laplace_mass_numeric(double a, double b, double mu, double sigma) {
  const int n = 2000;
  const double h = (b - a) / n;
  auto f = [&](double x) { return std::exp(-std::abs(x - mu) / sigma) / (2.0 * sigma); };
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_SUITE("entropy") {

TEST_CASE("quantization rounds half away from zero") {
  CHECK(quantize_value(0.5) == 1.0);
  CHECK(quantize_value(-0.5) == -1.0);
  CHECK(quantize_value(1.49) == 1.0);
  CHECK(quantize_value(-2.5) == -3.0);
  CHECK(quantize_value(0.0) == 0.0);
  const Tensor q = quantize(Tensor(1, 3, std::vector<double>{0.4, -0.6, 2.5}));
  CHECK(q == Tensor(1, 3, std::vector<double>{0.0, -1.0, 3.0}));
  std::mt19937_64 rng(1);
  const Tensor u = uniform_noise(40, 50, rng);
  for (double v : u.flat()) {
    CHECK(v >= -0.5);
    CHECK(v < 0.5);
  }
}

TEST_CASE("laplace mass examples") {
  CHECK(laplace_pmf(0, 0, 1) == doctest::Approx(0.39347).epsilon(1e-5));
  CHECK(laplace_pmf(0, 0, 1) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-14));
  CHECK(-std::log2(laplace_pmf(0, 0, 1)) == doctest::Approx(1.3459).epsilon(1e-4));
  // the floor
  CHECK(laplace_pmf(1000, 0, 1) == kPmin);
  const Tensor sym(1, 1, std::vector<double>{0.0});
  const LaplaceParams prm{Tensor(1, 1, 0.0), Tensor(1, 1, 1.0)};
  CHECK(rate_estimate(sym, prm) == doctest::Approx(1.3459).epsilon(1e-4));
}

TEST_CASE("laplace mass agrees with numeric integration and is symmetric") {
  test::Gen g(1);
  for (int t = 0; t < 1000; ++t) {
    const double mu = g.uniform(-5, 5), sigma = g.uniform(0.11, 6);
    const double n = std::round(mu + g.uniform(-4, 4) * sigma);
    const double p = laplace_pmf(n, mu, sigma);
    const double num = laplace_mass_numeric(n - 0.5, n + 0.5, mu, sigma);
    CHECK(p == doctest::Approx(std::max(num, kPmin)).epsilon(1e-6));
    CHECK(p >= kPmin);
    CHECK(p <= 1.0);
    CHECK(laplace_pmf(-n, -mu, sigma) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("laplace masses sum to one") {
  test::Gen g(2);
  for (int t = 0; t < 200; ++t) {
    const double mu = g.uniform(-3, 3), sigma = g.uniform(0.11, 4);
    double s = 0;
    for (int n = -400; n <= 400; ++n)
      s += nn::laplace_interval_mass(n - 0.5 - mu, n + 0.5 - mu, sigma);
    CHECK(s > 1.0 - 1e-12);
    CHECK(s < 1.0 + 1e-12);
  }
}

TEST_CASE("factorized density is a distribution") {
  test::Gen g(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> prm(3 * kFactorizedUnits);
    for (double& v : prm) v = g.uniform(-2, 2);
    double prev = 0.0, s = 0.0;
    for (int n = -3000; n <= 3000; ++n) {
      const double c = factorized_cdf(prm, n + 0.5);
      CHECK(c >= prev);
      prev = c;
      s += factorized_cdf(prm, n + 0.5) - factorized_cdf(prm, n - 0.5);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(factorized_pmf(prm, 1000) == kPmin);
  }
}

TEST_CASE("laplace coding round trip with escapes") {
  test::Gen g(4);
  std::vector<double> mu, sigma, sym;
  double estimate = 0;
  for (int i = 0; i < 20000; ++i) {
    mu.push_back(g.uniform(-20, 20));
    sigma.push_back(g.uniform(0.11, 10));
    double s = std::round(mu.back() + g.uniform(-3, 3) * sigma.back());
    if (i % 97 == 0) s += (i % 2 ? 1 : -1) * g.integer(200, 5000);
    sym.push_back(s);
    estimate -= std::log2(laplace_pmf(s, mu.back(), sigma.back()));
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < sym.size(); ++i) encode_laplace(enc, sym[i], mu[i], sigma[i]);
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  bool same = true;
  for (std::size_t i = 0; i < sym.size(); ++i) same &= decode_laplace(dec, mu[i], sigma[i]) == sym[i];
  CHECK(same);
  CHECK(8.0 * static_cast<double>(bytes.size()) > 0.5 * estimate);

  RangeEncoder bad;
  CHECK_THROWS_AS(encode_laplace(bad, 0.5, 0, 1), Error);
  CHECK_THROWS_AS(encode_laplace(bad, 1, 0, 0.05), Error);
}

TEST_CASE("in-window coding cost tracks the estimate") {
  test::Gen g(5);
  RangeEncoder enc;
  double estimate = 0;
  for (int i = 0; i < 50000; ++i) {
    const double mu = g.uniform(-4, 4), sigma = g.uniform(0.3, 3);
    // inverse-CDF sample
    const double u = g.uniform(-0.4999, 0.4999);
    const double s = std::round(mu - sigma * (u < 0 ? -1 : 1) * std::log(1 - 2 * std::abs(u)));
    estimate -= std::log2(laplace_pmf(s, mu, sigma));
    encode_laplace(enc, s, mu, sigma);
  }
  const double actual = 8.0 * static_cast<double>(enc.finish().size());
  CHECK(std::abs(actual - estimate) / estimate < 0.01);
}

TEST_CASE("laplace table covers a window of scales") {
  std::int64_t lo = 0;
  const CdfTable t = laplace_table(2.2, 1.0, &lo);
  CHECK(lo == 2 - 10);
  CHECK(t.size() == 21 + 2);
  const CdfTable narrow = laplace_table(0, kSigmaMin, &lo);
  CHECK(lo == -3);
  CHECK(narrow.size() == 7 + 2);
}

TEST_CASE("factorized coding round trip") {
  test::Gen g(6);
  Tensor params(5, 3 * kFactorizedUnits);
  for (double& v : params.flat()) v = g.uniform(-1, 1);
  Tensor z(40, 5);
  for (double& v : z.flat()) v = g.integer(-6, 6);
  z(3, 2) = 31;
  z(7, 0) = -400;
  RangeEncoder enc;
  encode_factorized(enc, z, params);
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  CHECK(decode_factorized(dec, 40, params) == z);
}

TEST_CASE("sequential prior equals the batched prior") {
  test::Gen g(7);
  CodecConfig cfg;
  const EntropyParams p = make_entropy("e", cfg);
  const std::size_t n = 37, c = p.latent_width(), hz = p.hyper_width();
  const std::size_t cw = static_cast<std::size_t>(cfg.context_width());
  const Tensor z = g.tensor(9, hz, 2.0);
  auto parent = std::make_shared<std::vector<std::int64_t>>();
  for (std::size_t i = 0; i < n; ++i) parent->push_back(static_cast<std::int64_t>(i / 5));
  Tensor y = g.tensor(n, c, 3.0);
  y = quantize(y);
  const Tensor ctx = g.tensor(n, cw);

  nn::Graph G(false);
  const PriorTerms all = predict_params(G, p, G.constant(z), parent, G.constant(y), G.constant(ctx));
  const SequentialPrior seq(p, z, *parent, ctx);
  double worst = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const LaplaceParams one = seq.next(nn::slice_rows(y, 0, r), r);
    for (std::size_t k = 0; k < c; ++k) {
      worst = std::max(worst, std::abs(one.mu(0, k) - G.value(all.mu)(r, k)));
      worst = std::max(worst, std::abs(one.sigma(0, k) - G.value(all.sigma)(r, k)));
      CHECK(one.sigma(0, k) >= kSigmaMin);
    }
  }
  CHECK(worst < 1e-12);

  // row i only sees earlier rows
  Tensor y2 = y;
  for (std::size_t k = 0; k < c; ++k) y2(20, k) += 5.0;
  const PriorTerms changed = predict_params(G, p, G.constant(z), parent, G.constant(y2), G.constant(ctx));
  for (std::size_t r = 0; r <= 20; ++r)
    for (std::size_t k = 0; k < c; ++k) CHECK(G.value(changed.mu)(r, k) == G.value(all.mu)(r, k));

  CHECK_THROWS_AS(seq.next(nn::slice_rows(y, 0, 3), 4), Error);
}

TEST_CASE("zeroed fusion gives a unit prior") {
  test::Gen g(8);
  CodecConfig cfg;
  EntropyParams p = make_entropy("e", cfg);
  for (auto& l : p.fusion.layers) {
    l.weight.value.fill(0.0);
    l.bias.value.fill(0.0);
  }
  const std::size_t n = 6;
  const Tensor z = g.tensor(2, p.hyper_width());
  auto parent = std::make_shared<std::vector<std::int64_t>>(n, 1);
  nn::Graph G(false);
  const PriorTerms t = predict_params(G, p, G.constant(z), parent, G.constant(g.tensor(n, p.latent_width())),
                                      G.constant(g.tensor(n, static_cast<std::size_t>(cfg.context_width()))));
  for (double v : G.value(t.mu).flat()) CHECK(v == 0.0);
  for (double v : G.value(t.sigma).flat()) CHECK(v == 1.0);
}

}
