#include <cmath>

#include "doctest.h"
#include "pcdc/entropy.hpp"
#include "pcdc/error.hpp"
#include "pcdc/range_coder.hpp"
#include "test_util.hpp"

using namespace pcdc;

namespace {

struct Stream {
  std::vector<CdfTable> tables;
  std::vector<std::size_t> table_of;
  std::vector<std::size_t> symbols;
  double ideal_bits = 0.0;
};

// Symbols drawn from quantized Laplace tables with random scales.
Stream laplace_stream(test::Gen& g, std::size_t n, std::size_t ntables) {
  Stream s;
  for (std::size_t t = 0; t < ntables; ++t) {
    const double sigma = g.uniform(0.2, 8.0), mu = g.uniform(-2.0, 2.0);
    std::vector<double> pmf;
    for (int k = -40; k <= 40; ++k) pmf.push_back(laplace_pmf(k, mu, sigma));
    s.tables.push_back(CdfTable::from_pmf(pmf));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = g.bits() % ntables;
    const CdfTable& tab = s.tables[t];
    // inverse-CDF draw from the quantized table itself
    const auto u = static_cast<std::uint32_t>(g.bits() % kProbTotal);
    const auto sym = static_cast<std::size_t>(
        std::upper_bound(tab.cum.begin(), tab.cum.end(), u) - tab.cum.begin() - 1);
    s.table_of.push_back(t);
    s.symbols.push_back(sym);
    s.ideal_bits += tab.bits(sym);
  }
  return s;
}

}  // namespace

TEST_SUITE("range_coder") {

TEST_CASE("table quantization invariants") {
  test::Gen g(1);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> pmf(static_cast<std::size_t>(g.integer(1, 600)));
    for (double& p : pmf) p = (g.bits() % 4 == 0) ? 0.0 : g.unit() * g.unit();
    const CdfTable tab = CdfTable::from_pmf(pmf);
    CHECK_NOTHROW(tab.validate());
    CHECK(tab.cum.front() == 0);
    CHECK(tab.cum.back() == kProbTotal);
    for (std::size_t s = 0; s < tab.size(); ++s) CHECK(tab.freq(s) >= 1);
  }
  const CdfTable u = CdfTable::uniform(2);
  CHECK(u.freq(0) == 32768);
  CHECK(u.freq(1) == 32768);
  CHECK_THROWS_AS(CdfTable::from_pmf(std::vector<double>{}), Error);
  CHECK_THROWS_AS(CdfTable::from_pmf(std::vector<double>{0.5, NAN}), Error);
}

TEST_CASE("single symbol round trip") {
  const CdfTable t = CdfTable::uniform(2);
  for (std::size_t s : {0u, 1u}) {
    RangeEncoder enc;
    enc.encode(t, s);
    const auto bytes = enc.finish();
    CHECK(bytes.size() <= 1);
    RangeDecoder dec(bytes);
    CHECK(dec.decode(t) == s);
  }
}

TEST_CASE("fuzzed round trip with bit accounting") {
  test::Gen g(2);
  const Stream s = laplace_stream(g, 100000, 24);
  RangeEncoder enc;
  for (std::size_t i = 0; i < s.symbols.size(); ++i) enc.encode(s.tables[s.table_of[i]], s.symbols[i]);
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  bool same = true;
  for (std::size_t i = 0; i < s.symbols.size(); ++i) same &= dec.decode(s.tables[s.table_of[i]]) == s.symbols[i];
  CHECK(same);
  const double actual = 8.0 * static_cast<double>(bytes.size());
  CHECK(actual <= s.ideal_bits * 1.01 + 32.0);
  CHECK(actual >= s.ideal_bits - 8.0);
}

TEST_CASE("short streams of random tables round trip") {
  test::Gen g(3);
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<CdfTable> tabs;
    std::vector<std::size_t> which, syms;
    const int n = g.integer(0, 60);
    for (int i = 0; i < n; ++i) {
      std::vector<double> pmf(static_cast<std::size_t>(g.integer(1, 300)));
      for (double& p : pmf) p = g.unit() * g.unit() * g.unit();
      tabs.push_back(CdfTable::from_pmf(pmf));
      syms.push_back(g.bits() % pmf.size());
    }
    RangeEncoder enc;
    for (int i = 0; i < n; ++i) enc.encode(tabs[static_cast<std::size_t>(i)], syms[static_cast<std::size_t>(i)]);
    const auto bytes = enc.finish();
    RangeDecoder dec(bytes);
    for (int i = 0; i < n; ++i) REQUIRE(dec.decode(tabs[static_cast<std::size_t>(i)]) == syms[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("raw bits and exp-golomb") {
  test::Gen g(4);
  std::vector<std::pair<std::uint32_t, int>> bits;
  std::vector<std::uint64_t> eg;
  RangeEncoder enc;
  for (int i = 0; i < 2000; ++i) {
    const int nb = g.integer(0, 16);
    const auto v = static_cast<std::uint32_t>(nb ? g.bits() % (1u << nb) : 0);
    bits.emplace_back(v, nb);
    enc.encode_bits(v, nb);
    const std::uint64_t e = g.bits() >> g.integer(1, 63);
    eg.push_back(e);
    enc.encode_exp_golomb(e);
  }
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    REQUIRE(dec.decode_bits(bits[i].second) == bits[i].first);
    REQUIRE(dec.decode_exp_golomb() == eg[i]);
  }
  CHECK_THROWS_AS(enc.encode_bits(0, 17), Error);
}

TEST_CASE("reading past the end is a decode error") {
  const CdfTable t = CdfTable::uniform(256);
  RangeEncoder enc;
  for (int i = 0; i < 100; ++i) enc.encode(t, static_cast<std::size_t>(i));
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  for (int i = 0; i < 100; ++i) dec.decode(t);
  try {
    for (int i = 0; i < 100; ++i) dec.decode(t);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDecodeError);
    REQUIRE(e.byte_offset().has_value());
    CHECK(*e.byte_offset() <= bytes.size());
  }
}

TEST_CASE("garbage input never crashes") {
  test::Gen g(5);
  const CdfTable t = CdfTable::from_pmf(std::vector<double>{0.7, 0.2, 0.05, 0.05});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::uint8_t> junk(static_cast<std::size_t>(g.integer(0, 40)));
    for (auto& b : junk) b = static_cast<std::uint8_t>(g.bits());
    try {
      RangeDecoder dec(junk);
      for (int i = 0; i < 500; ++i) dec.decode(t);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDecodeError);
    }
  }
}

TEST_CASE("output depends only on the symbol sequence") {
  test::Gen g1(6), g2(6);
  const Stream a = laplace_stream(g1, 5000, 4), b = laplace_stream(g2, 5000, 4);
  RangeEncoder ea, eb;
  for (std::size_t i = 0; i < a.symbols.size(); ++i) {
    ea.encode(a.tables[a.table_of[i]], a.symbols[i]);
    eb.encode(b.tables[b.table_of[i]], b.symbols[i]);
  }
  CHECK(ea.finish() == eb.finish());
}

}
