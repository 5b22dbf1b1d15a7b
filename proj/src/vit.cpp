#include "sgt/vit.hpp"

#include <string>

#include "sgt/errors.hpp"
#include "sgt/patch_graph.hpp"

namespace sgt::ssl {

void EncoderConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0) {
    throw ConfigError("encoder: image size " + std::to_string(image_size) +
                      " not divisible by patch size " + std::to_string(patch_size));
  }
  if (dim == 0 || heads == 0 || dim % heads != 0) {
    throw ConfigError("encoder: dim must be a positive multiple of heads");
  }
  if (mlp_dim == 0) throw ConfigError("encoder: mlp_dim must be positive");
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  num::Rng rng = num::Rng::stream(seed, "init/encoder");
  EncoderParams p;
  p.config = cfg;
  p.patch_weight = model::init_weight({cfg.patch_dim(), cfg.dim}, rng);
  p.patch_bias = Tensor::zeros({cfg.dim});
  p.cls_token = model::init_weight({1, cfg.dim}, rng);
  p.mask_token = model::init_weight({1, cfg.dim}, rng);
  p.pos_embed = model::init_weight({cfg.tokens() + 1, cfg.dim}, rng);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    p.blocks.push_back(model::init_block(cfg.dim, cfg.heads, cfg.mlp_dim, rng));
  }
  p.final_gain = Tensor::full({cfg.dim}, 1.0);
  p.final_bias = Tensor::zeros({cfg.dim});
  return p;
}

void EncoderParams::visit(const std::string& prefix, const TensorVisitor& fn) {
  fn(prefix + ".patch.weight", patch_weight);
  fn(prefix + ".patch.bias", patch_bias);
  fn(prefix + ".cls", cls_token);
  fn(prefix + ".mask_token", mask_token);
  fn(prefix + ".pos", pos_embed);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    model::visit_block(blocks[i], prefix + ".block." + std::to_string(i), fn);
  }
  fn(prefix + ".final.gain", final_gain);
  fn(prefix + ".final.bias", final_bias);
}

BoundEncoder bind_encoder(GradientContext& ctx, const EncoderParams& p, bool tracked,
                          const std::string& prefix) {
  auto bind = [&](const Tensor& t, const std::string& name) {
    return tracked ? ctx.param(prefix + name, t) : ctx.constant(t);
  };
  BoundEncoder b;
  b.config = p.config;
  b.patch_weight = bind(p.patch_weight, ".patch.weight");
  b.patch_bias = bind(p.patch_bias, ".patch.bias");
  b.cls_token = bind(p.cls_token, ".cls");
  b.mask_token = bind(p.mask_token, ".mask_token");
  b.pos_embed = bind(p.pos_embed, ".pos");
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    b.blocks.push_back(
        model::bind_block(ctx, p.blocks[i], tracked, prefix + ".block." + std::to_string(i)));
  }
  b.final_gain = bind(p.final_gain, ".final.gain");
  b.final_bias = bind(p.final_bias, ".final.bias");
  return b;
}

Tensor patch_matrix(const Tensor& image, std::size_t patch_size) {
  if (image.rank() != 3) {
    throw ShapeError("patch_matrix: expected H×W×C image, got " + image.shape_str());
  }
  graph::PatchGrid grid;
  auto patches = graph::partition_image(image, patch_size, &grid);
  const std::size_t pd = patch_size * patch_size * image.shape()[2];
  Tensor out({patches.size(), pd});
  for (std::size_t i = 0; i < patches.size(); ++i) {
    std::copy(patches[i].data(), patches[i].data() + pd, out.data() + i * pd);
  }
  return out;
}

Encoded encode(GradientContext& ctx, const Tensor& view, const std::vector<std::uint8_t>& mask,
               const BoundEncoder& enc) {
  const EncoderConfig& cfg = enc.config;
  if (view.rank() != 3 || view.shape()[0] != cfg.image_size || view.shape()[1] != cfg.image_size) {
    throw ShapeError("encode: view " + view.shape_str() + " does not match encoder config");
  }
  const std::size_t n = cfg.tokens();
  if (!mask.empty() && mask.size() != n) throw ShapeError("encode: mask length != token count");

  Value embedded = ctx.add_rowvec(
      ctx.matmul(ctx.constant(patch_matrix(view, cfg.patch_size)), enc.patch_weight),
      enc.patch_bias);
  if (!mask.empty()) embedded = ctx.replace_rows(embedded, enc.mask_token, mask);
  Value z = ctx.add(ctx.concat_rows(enc.cls_token, embedded), enc.pos_embed);
  for (const auto& block : enc.blocks) z = model::transformer_block(ctx, z, block);
  z = ctx.layer_norm(z, enc.final_gain, enc.final_bias, model::kLayerNormEps);
  return Encoded{ctx.slice_rows(z, 0, 1), ctx.slice_rows(z, 1, n + 1)};
}

Tensor extract_patch_features(const EncoderParams& p, const Tensor& image) {
  GradientContext ctx;
  BoundEncoder enc = bind_encoder(ctx, p, false, "enc");
  Encoded out = encode(ctx, image, {}, enc);
  return ctx.value(out.patches);
}

Tensor extract_cls_feature(const EncoderParams& p, const Tensor& image) {
  GradientContext ctx;
  BoundEncoder enc = bind_encoder(ctx, p, false, "enc");
  Encoded out = encode(ctx, image, {}, enc);
  return ctx.value(out.cls);
}

}  // namespace sgt::ssl
