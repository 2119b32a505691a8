#ifndef PCDC_MODEL_HPP_
#define PCDC_MODEL_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcdc/align.hpp"
#include "pcdc/config.hpp"
#include "pcdc/ctr.hpp"
#include "pcdc/entropy.hpp"
#include "pcdc/nn/layers.hpp"
#include "pcdc/scale.hpp"

namespace pcdc {

// Feature decoder from the coded latent back to stage 3: each stage-3 point
// takes its slot of a per-parent linear expansion, joined with the context.
struct ContextualDecoder {
  nn::LinearLayer expand;  // latent -> 8 * C3
  nn::Mlp mix;             // C3 + context -> C3

  template <typename F>
  void for_each_param(F&& f) {
    expand.for_each_param(f);
    mix.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    expand.for_each_param(f);
    mix.for_each_param(f);
  }
};

// Every trainable tensor of the codec.
struct CodecWeights {
  std::array<DownsampleBlock, 3> down;  // stage 0->1, 1->2, 2->3
  DownsampleBlock latent;               // stage 3 (+ context) -> 4
  AlignParams align;
  FuseParams fuse;
  ContextualDecoder decoder;
  CtrParams ctr;
  EntropyParams entropy;
  std::array<UpsampleBlock, 3> up;      // stage 3->2, 2->1, 1->0

  template <typename F>
  void for_each_param(F&& f) {
    for (auto& d : down) d.for_each_param(f);
    latent.for_each_param(f);
    align.for_each_param(f);
    fuse.for_each_param(f);
    decoder.for_each_param(f);
    ctr.for_each_param(f);
    entropy.for_each_param(f);
    for (auto& u : up) u.for_each_param(f);
  }
  template <typename F>
  void for_each_param(F&& f) const {
    for (const auto& d : down) d.for_each_param(f);
    latent.for_each_param(f);
    align.for_each_param(f);
    fuse.for_each_param(f);
    decoder.for_each_param(f);
    ctr.for_each_param(f);
    entropy.for_each_param(f);
    for (const auto& u : up) u.for_each_param(f);
  }

  std::vector<nn::Param*> params();
  std::vector<const nn::Param*> params() const;
  std::uint64_t hash() const;
  std::size_t scalar_count() const;
};

// Seeded initialization; identical (cfg, cfg.seed) give bit-identical weights.
CodecWeights make_weights(const CodecConfig& cfg);

void save_weights(const std::string& path, const CodecConfig& cfg, const CodecWeights& w);
CodecWeights load_weights(const std::string& path, const CodecConfig& cfg);

}  // namespace pcdc

#endif  // PCDC_MODEL_HPP_
