#ifndef PCDC_RANGE_CODER_HPP_
#define PCDC_RANGE_CODER_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace pcdc {

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1u << kProbBits;

// Cumulative frequencies of n symbols scaled to 2^16. cum has n + 1 entries,
// cum[0] = 0, cum[n] = 65536, every symbol at least 1 wide.
struct CdfTable {
  std::vector<std::uint32_t> cum;

  std::size_t size() const { return cum.size() - 1; }
  std::uint32_t freq(std::size_t s) const { return cum[s + 1] - cum[s]; }
  // Ideal cost of coding `s` with this table.
  double bits(std::size_t s) const;

  // freq_i = 1 + floor(p_i * (65536 - n)); leftover mass goes to the first
  // most probable symbol. Probabilities need not be normalized.
  static CdfTable from_pmf(std::span<const double> pmf);
  // Same quantization from nonnegative counts.
  static CdfTable from_counts(std::span<const std::uint64_t> counts);
  static CdfTable uniform(std::size_t n);
  void validate() const;
};

// Carry-less byte-oriented range coder (Subbotin) with a 32-bit state.
class RangeEncoder {
 public:
  void encode(const CdfTable& table, std::size_t symbol);
  // Raw cum/freq interface over a 2^16 total.
  void encode_range(std::uint32_t cum, std::uint32_t freq);
  // Up to 16 equiprobable bits.
  void encode_bits(std::uint32_t value, int nbits);
  // Order-0 Exp-Golomb code of v via equiprobable bits.
  void encode_exp_golomb(std::uint64_t v);

  // Flushes the fewest bytes that pin the final interval, given that the
  // decoder reads zeros past the end. The encoder is spent afterwards.
  std::vector<std::uint8_t> finish();

 private:
  void normalize();
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  // `base_offset` is added to byte positions reported in DecodeError.
  explicit RangeDecoder(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0);

  std::size_t decode(const CdfTable& table);
  std::uint32_t decode_bits(int nbits);
  std::uint64_t decode_exp_golomb();

  // Bytes consumed so far, including implicit zero padding.
  std::size_t position() const { return pos_; }

 private:
  std::uint32_t peek_cum();
  void consume(std::uint32_t cum, std::uint32_t freq);
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t base_;
  std::size_t pos_ = 0;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace pcdc

#endif  // PCDC_RANGE_CODER_HPP_
