#include "pcdc/config.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "pcdc/error.hpp"
#include "pcdc/hash.hpp"

namespace pcdc {

void CodecConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidArgument, what); };
  if (gof_size < 2 || gof_size > 128 || !std::has_single_bit(static_cast<unsigned>(gof_size))) {
    bad("gof_size must be a power of two in [2, 128], got " + std::to_string(gof_size));
  }
  if (knn_k < 1) bad("knn_k must be >= 1");
  if (ctr_k < 1) bad("ctr_k must be >= 1");
  if (!(lambda > 0.0)) bad("lambda must be > 0");
  if (!(peak > 0.0)) bad("peak must be > 0");
  if (bit_depth < 5 || bit_depth > 21) bad("bit_depth must be in [5, 21]");
  if (ar_window < 1) bad("ar_window must be >= 1");
  if (hyper_width < 1 || hidden_cap < 1) bad("widths must be positive");
  for (int w : feature_width) {
    if (w < 1) bad("feature widths must be positive");
  }
}

std::uint64_t CodecConfig::model_hash() const {
  Fnv1a h;
  h.update("pcdc-model-v1");
  h.update_u64(static_cast<std::uint64_t>(knn_k));
  h.update_u64(static_cast<std::uint64_t>(ctr_k));
  h.update_f64(lambda);
  h.update_u64(static_cast<std::uint64_t>(bit_depth));
  for (int w : feature_width) h.update_u64(static_cast<std::uint64_t>(w));
  h.update_u64(static_cast<std::uint64_t>(hyper_width));
  h.update_u64(static_cast<std::uint64_t>(ar_window));
  h.update_u64(static_cast<std::uint64_t>(hidden_cap));
  h.update_f64(peak);
  return h.digest();
}

std::uint8_t lambda_index(double lambda) {
  for (std::size_t i = 0; i < kLambdaLadder.size(); ++i) {
    if (kLambdaLadder[i] == lambda) return static_cast<std::uint8_t>(i);
  }
  return kLambdaIndexCustom;
}

int hidden_width(const CodecConfig& cfg, int in_width) {
  return std::max(1, std::min(2 * in_width, cfg.hidden_cap));
}

}  // namespace pcdc
