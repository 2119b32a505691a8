#include "pcdc/model.hpp"

#include "pcdc/nn/checkpoint.hpp"

namespace pcdc {

std::vector<nn::Param*> CodecWeights::params() {
  std::vector<nn::Param*> out;
  for_each_param([&out](nn::Param& p) { out.push_back(&p); });
  return out;
}

std::vector<const nn::Param*> CodecWeights::params() const {
  std::vector<const nn::Param*> out;
  for_each_param([&out](const nn::Param& p) { out.push_back(&p); });
  return out;
}

std::uint64_t CodecWeights::hash() const { return nn::weights_hash(params()); }

std::size_t CodecWeights::scalar_count() const {
  std::size_t n = 0;
  for_each_param([&n](const nn::Param& p) { n += p.value.size(); });
  return n;
}

CodecWeights make_weights(const CodecConfig& cfg) {
  cfg.validate();
  auto w = [&cfg](int stage) { return static_cast<std::size_t>(cfg.feature_width[stage]); };
  const std::size_t c3 = w(3), c4 = w(4);
  const auto ctx = static_cast<std::size_t>(cfg.context_width());
  const auto mix_in = c3 + ctx;
  return CodecWeights{
      {make_downsample("down0", w(0), w(1), OutputAct::kRelu, cfg),
       make_downsample("down1", w(1), w(2), OutputAct::kRelu, cfg),
       make_downsample("down2", w(2), w(3), OutputAct::kLayerNorm, cfg)},
      make_downsample("latent", c3 + ctx, c4, OutputAct::kNone, cfg),
      make_align("fmt", c3, cfg),
      make_fuse("fuse", kDescriptorWidth, c3, ctx, cfg),
      ContextualDecoder{
          nn::make_linear("cdec.expand", c4, 8 * c3, cfg.seed),
          nn::make_mlp("cdec.mix",
                       {mix_in, static_cast<std::size_t>(hidden_width(cfg, static_cast<int>(mix_in))),
                        c3},
                       cfg.seed)},
      make_ctr("ctr", c3, cfg),
      make_entropy("ent", cfg),
      {make_upsample("up3", c3, w(2), cfg), make_upsample("up2", w(2), w(1), cfg),
       make_upsample("up1", w(1), w(0), cfg)}};
}

void save_weights(const std::string& path, const CodecConfig& cfg, const CodecWeights& w) {
  nn::save_checkpoint(path, cfg.model_hash(), w.params());
}

CodecWeights load_weights(const std::string& path, const CodecConfig& cfg) {
  CodecWeights w = make_weights(cfg);
  nn::load_checkpoint(path, cfg.model_hash(), w.params());
  return w;
}

}  // namespace pcdc
