#pragma once

#include <cstdint>
#include <vector>

#include "sgt/attention.hpp"
#include "sgt/grad.hpp"

namespace sgt::ssl {

using model::TensorVisitor;
using num::GradientContext;
using num::Tensor;
using num::Value;

struct EncoderConfig {
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t depth = 4;
  std::size_t mlp_dim = 128;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t tokens() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch_size * patch_size * 3; }
  void validate() const;
};

// Pre-norm ViT with a class token, learned positional embeddings, and a
// learned mask token substituted at masked positions before the blocks.
struct EncoderParams {
  EncoderConfig config;
  Tensor patch_weight;  // patch_dim×D
  Tensor patch_bias;    // D
  Tensor cls_token;     // 1×D
  Tensor mask_token;    // 1×D
  Tensor pos_embed;     // (N+1)×D, class token at row 0
  std::vector<model::TransformerBlockParams> blocks;
  Tensor final_gain, final_bias;

  static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed);
  void visit(const std::string& prefix, const TensorVisitor& fn);
};

struct BoundEncoder {
  EncoderConfig config;
  Value patch_weight, patch_bias, cls_token, mask_token, pos_embed;
  std::vector<model::BoundBlock> blocks;
  Value final_gain, final_bias;
};

BoundEncoder bind_encoder(GradientContext& ctx, const EncoderParams& p, bool tracked,
                          const std::string& prefix);

// Flattens an H×W×3 image into the N×patch_dim matrix of row-major patches.
Tensor patch_matrix(const Tensor& image, std::size_t patch_size);

struct Encoded {
  Value cls;      // 1×D
  Value patches;  // N×D
};

// mask: length-N 0/1 vector or empty for no masking.
Encoded encode(GradientContext& ctx, const Tensor& view, const std::vector<std::uint8_t>& mask,
               const BoundEncoder& enc);

// Frozen-encoder helpers used by the classifier pipeline (no gradients).
Tensor extract_patch_features(const EncoderParams& p, const Tensor& image);
Tensor extract_cls_feature(const EncoderParams& p, const Tensor& image);

}  // namespace sgt::ssl
