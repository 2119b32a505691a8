#include "pcdc/range_coder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "pcdc/error.hpp"

namespace pcdc {

namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kBot = 1u << 16;
// The padding a legitimate stream can need: the decoder primes 4 bytes.
constexpr std::size_t kMaxPadding = 4;

}  // namespace

double CdfTable::bits(std::size_t s) const {
  return -std::log2(static_cast<double>(freq(s)) / kProbTotal);
}

CdfTable CdfTable::from_pmf(std::span<const double> pmf) {
  const std::size_t n = pmf.size();
  if (n == 0 || n > kProbTotal) {
    fail(ErrorCode::kInvalidArgument, "CdfTable: alphabet size " + std::to_string(n));
  }
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorCode::kNonFinite, "CdfTable: bad probability");
    total += p;
  }
  const double spread = static_cast<double>(kProbTotal - n);
  std::vector<std::uint32_t> freq(n, 1);
  std::uint32_t used = static_cast<std::uint32_t>(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = total > 0.0 ? pmf[i] / total : 1.0 / static_cast<double>(n);
    const auto extra = static_cast<std::uint32_t>(std::floor(share * spread));
    freq[i] += extra;
    used += extra;
    if (pmf[i] > pmf[best]) best = i;
  }
  if (used > kProbTotal) {
    // Rounding can only undershoot, but keep the invariant airtight.
    fail(ErrorCode::kInvalidArgument, "CdfTable: quantized mass exceeds total");
  }
  freq[best] += kProbTotal - used;
  CdfTable t;
  t.cum.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + freq[i];
  return t;
}

CdfTable CdfTable::from_counts(std::span<const std::uint64_t> counts) {
  std::vector<double> p(counts.begin(), counts.end());
  return from_pmf(p);
}

CdfTable CdfTable::uniform(std::size_t n) {
  std::vector<double> p(n, 1.0);
  return from_pmf(p);
}

void CdfTable::validate() const {
  if (cum.size() < 2 || cum.front() != 0 || cum.back() != kProbTotal) {
    fail(ErrorCode::kInvalidArgument, "CdfTable: bad endpoints");
  }
  for (std::size_t i = 0; i + 1 < cum.size(); ++i) {
    if (cum[i + 1] <= cum[i]) fail(ErrorCode::kInvalidArgument, "CdfTable: zero-width symbol");
  }
}

void RangeEncoder::normalize() {
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (0u - low_) & (kBot - 1)), true))) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

void RangeEncoder::encode_range(std::uint32_t cum, std::uint32_t freq) {
  range_ >>= kProbBits;
  low_ += cum * range_;
  range_ *= freq;
  normalize();
}

void RangeEncoder::encode(const CdfTable& table, std::size_t symbol) {
  if (symbol >= table.size()) {
    fail(ErrorCode::kInvalidArgument, "range coder: symbol " + std::to_string(symbol) +
                                          " outside table of " + std::to_string(table.size()));
  }
  encode_range(table.cum[symbol], table.freq(symbol));
}

void RangeEncoder::encode_bits(std::uint32_t value, int nbits) {
  if (nbits < 0 || nbits > kProbBits) fail(ErrorCode::kInvalidArgument, "encode_bits: width");
  if (nbits == 0) return;
  const int shift = kProbBits - nbits;
  encode_range((value & ((1u << nbits) - 1)) << shift, 1u << shift);
}

void RangeEncoder::encode_exp_golomb(std::uint64_t v) {
  if (v == UINT64_MAX) fail(ErrorCode::kInvalidArgument, "exp-golomb: value too large");
  const int n = std::bit_width(v + 1) - 1;
  for (int i = 0; i < n; ++i) encode_bits(1, 1);
  encode_bits(0, 1);
  const std::uint64_t rest = (v + 1) - (std::uint64_t{1} << n);
  for (int done = 0; done < n;) {
    const int chunk = std::min(kProbBits, n - done);
    encode_bits(static_cast<std::uint32_t>(rest >> done), chunk);
    done += chunk;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  // Pick the value in [low, low + range) with the most trailing zero bytes.
  const std::uint64_t lo = low_, hi = std::uint64_t{low_} + range_;
  for (int n = 0; n <= 4; ++n) {
    const std::uint64_t unit = std::uint64_t{1} << (32 - 8 * n);
    const std::uint64_t v = (lo + unit - 1) / unit * unit;
    if (v < hi && v <= 0xFFFFFFFFu) {
      for (int b = 0; b < n; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (24 - 8 * b)));
      break;
    }
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes, std::size_t base_offset)
    : in_(bytes), base_(base_offset) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  const std::size_t p = pos_++;
  if (p < in_.size()) return in_[p];
  if (p >= in_.size() + kMaxPadding) {
    fail_decode(base_ + in_.size(), "range decoder: read past the end of the payload");
  }
  return 0;
}

std::uint32_t RangeDecoder::peek_cum() {
  range_ >>= kProbBits;
  const std::uint32_t v = (code_ - low_) / range_;
  if (v >= kProbTotal) {
    fail_decode(base_ + std::min(pos_, in_.size()), "range decoder: corrupt payload");
  }
  return v;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  low_ += cum * range_;
  range_ *= freq;
  while ((low_ ^ (low_ + range_)) < kTop ||
         (range_ < kBot && ((range_ = (0u - low_) & (kBot - 1)), true))) {
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

std::size_t RangeDecoder::decode(const CdfTable& table) {
  const std::uint32_t v = peek_cum();
  const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), v);
  const auto s = static_cast<std::size_t>(it - table.cum.begin()) - 1;
  consume(table.cum[s], table.freq(s));
  return s;
}

std::uint32_t RangeDecoder::decode_bits(int nbits) {
  if (nbits < 0 || nbits > kProbBits) fail(ErrorCode::kInvalidArgument, "decode_bits: width");
  if (nbits == 0) return 0;
  const int shift = kProbBits - nbits;
  const std::uint32_t v = peek_cum() >> shift;
  consume(v << shift, 1u << shift);
  return v;
}

std::uint64_t RangeDecoder::decode_exp_golomb() {
  int n = 0;
  while (decode_bits(1) == 1) {
    if (++n > 63) fail_decode(base_ + std::min(pos_, in_.size()), "exp-golomb: prefix too long");
  }
  std::uint64_t rest = 0;
  for (int done = 0; done < n;) {
    const int chunk = std::min(kProbBits, n - done);
    rest |= static_cast<std::uint64_t>(decode_bits(chunk)) << done;
    done += chunk;
  }
  return (std::uint64_t{1} << n) - 1 + rest;
}

}  // namespace pcdc
