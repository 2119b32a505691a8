#ifndef PCDC_CONFIG_HPP_
#define PCDC_CONFIG_HPP_

#include <array>
#include <cstdint>

namespace pcdc {

// Rate points the model ladder is trained for; the stream stores an index.
inline constexpr std::array<double, 5> kLambdaLadder = {1.0, 3.0, 5.0, 8.0, 15.0};
inline constexpr std::uint8_t kLambdaIndexCustom = 255;

struct CodecConfig {
  int gof_size = 16;
  int knn_k = 32;
  int ctr_k = 16;
  double lambda = 15.0;
  int bit_depth = 10;
  // Channel widths of stages 0..4.
  std::array<int, 5> feature_width = {1, 16, 32, 64, 96};
  int hyper_width = 32;
  int ar_window = 8;
  // Cap on MLP hidden widths (hidden = min(2 * in, cap)).
  int hidden_cap = 192;
  double peak = 1023.0;
  std::uint64_t seed = 0;

  int context_width() const { return feature_width[3]; }
  int latent_width() const { return feature_width[4]; }

  // Throws kInvalidArgument when an invariant is violated.
  void validate() const;

  // Hash of everything that shapes the trained model. gof_size and seed are
  // excluded: they do not change what a set of weights means.
  std::uint64_t model_hash() const;
};

std::uint8_t lambda_index(double lambda);
int hidden_width(const CodecConfig& cfg, int in_width);

}  // namespace pcdc

#endif  // PCDC_CONFIG_HPP_
