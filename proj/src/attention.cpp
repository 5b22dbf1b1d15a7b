#include "sgt/attention.hpp"

#include <cmath>

#include "sgt/errors.hpp"

namespace sgt::model {

Tensor init_weight(std::vector<std::size_t> shape, num::Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.02 * rng.normal();
  return t;
}

Tensor glorot_weight(std::vector<std::size_t> shape, num::Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(t.shape()[0] + t.shape()[1]));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

AttentionParams init_attention(std::size_t dim, std::size_t heads, num::Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  const std::size_t d_head = dim / heads;
  AttentionParams p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.wq.push_back(init_weight({dim, d_head}, rng));
    p.wk.push_back(init_weight({dim, d_head}, rng));
    p.wv.push_back(init_weight({dim, d_head}, rng));
  }
  p.wo = init_weight({dim, dim}, rng);
  return p;
}

TransformerBlockParams init_block(std::size_t dim, std::size_t heads, std::size_t mlp_dim,
                                  num::Rng& rng) {
  TransformerBlockParams b;
  b.ln1_gain = Tensor::full({dim}, 1.0);
  b.ln1_bias = Tensor::zeros({dim});
  b.attn = init_attention(dim, heads, rng);
  b.ln2_gain = Tensor::full({dim}, 1.0);
  b.ln2_bias = Tensor::zeros({dim});
  b.mlp_w1 = init_weight({dim, mlp_dim}, rng);
  b.mlp_b1 = Tensor::zeros({mlp_dim});
  b.mlp_w2 = init_weight({mlp_dim, dim}, rng);
  b.mlp_b2 = Tensor::zeros({dim});
  return b;
}

void visit_attention(AttentionParams& p, const std::string& prefix, const TensorVisitor& fn) {
  for (std::size_t h = 0; h < p.wq.size(); ++h) {
    fn(prefix + ".wq." + std::to_string(h), p.wq[h]);
    fn(prefix + ".wk." + std::to_string(h), p.wk[h]);
    fn(prefix + ".wv." + std::to_string(h), p.wv[h]);
  }
  fn(prefix + ".wo", p.wo);
}

void visit_block(TransformerBlockParams& p, const std::string& prefix, const TensorVisitor& fn) {
  fn(prefix + ".ln1.gain", p.ln1_gain);
  fn(prefix + ".ln1.bias", p.ln1_bias);
  visit_attention(p.attn, prefix + ".attn", fn);
  fn(prefix + ".ln2.gain", p.ln2_gain);
  fn(prefix + ".ln2.bias", p.ln2_bias);
  fn(prefix + ".mlp.w1", p.mlp_w1);
  fn(prefix + ".mlp.b1", p.mlp_b1);
  fn(prefix + ".mlp.w2", p.mlp_w2);
  fn(prefix + ".mlp.b2", p.mlp_b2);
}

namespace {

Value bind_one(GradientContext& ctx, const Tensor& t, bool tracked, const std::string& name) {
  return tracked ? ctx.param(name, t) : ctx.constant(t);
}

}  // namespace

BoundAttention bind_attention(GradientContext& ctx, const AttentionParams& p, bool tracked,
                              const std::string& prefix) {
  BoundAttention b;
  for (std::size_t h = 0; h < p.wq.size(); ++h) {
    const std::string hs = std::to_string(h);
    b.wq.push_back(bind_one(ctx, p.wq[h], tracked, prefix + ".wq." + hs));
    b.wk.push_back(bind_one(ctx, p.wk[h], tracked, prefix + ".wk." + hs));
    b.wv.push_back(bind_one(ctx, p.wv[h], tracked, prefix + ".wv." + hs));
  }
  b.wo = bind_one(ctx, p.wo, tracked, prefix + ".wo");
  return b;
}

BoundBlock bind_block(GradientContext& ctx, const TransformerBlockParams& p, bool tracked,
                      const std::string& prefix) {
  BoundBlock b;
  b.ln1_gain = bind_one(ctx, p.ln1_gain, tracked, prefix + ".ln1.gain");
  b.ln1_bias = bind_one(ctx, p.ln1_bias, tracked, prefix + ".ln1.bias");
  b.attn = bind_attention(ctx, p.attn, tracked, prefix + ".attn");
  b.ln2_gain = bind_one(ctx, p.ln2_gain, tracked, prefix + ".ln2.gain");
  b.ln2_bias = bind_one(ctx, p.ln2_bias, tracked, prefix + ".ln2.bias");
  b.mlp_w1 = bind_one(ctx, p.mlp_w1, tracked, prefix + ".mlp.w1");
  b.mlp_b1 = bind_one(ctx, p.mlp_b1, tracked, prefix + ".mlp.b1");
  b.mlp_w2 = bind_one(ctx, p.mlp_w2, tracked, prefix + ".mlp.w2");
  b.mlp_b2 = bind_one(ctx, p.mlp_b2, tracked, prefix + ".mlp.b2");
  return b;
}

Value msa(GradientContext& ctx, Value tokens, const BoundAttention& p, const AttentionTap& tap,
          bool order_independent) {
  const std::size_t heads = p.wq.size();
  const std::size_t d_head = ctx.value(p.wq[0]).cols();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_head));
  std::vector<Value> head_outputs;
  head_outputs.reserve(heads);
  const bool use_override = tap.override_probs && !tap.override_probs->empty();
  for (std::size_t h = 0; h < heads; ++h) {
    Value v = ctx.matmul(tokens, p.wv[h]);
    Value probs;
    if (use_override) {
      probs = (*tap.override_probs)[h];
    } else {
      Value q = ctx.matmul(tokens, p.wq[h]);
      Value k = ctx.matmul(tokens, p.wk[h]);
      Value scores = ctx.scale(ctx.matmul(q, ctx.transpose(k)), inv_sqrt_dk);
      probs = ctx.softmax_rows(scores, order_independent);
    }
    if (tap.record) tap.record->push_back(probs);
    head_outputs.push_back(order_independent ? ctx.matmul_nodesum(probs, v)
                                             : ctx.matmul(probs, v));
  }
  Value concat = heads == 1 ? head_outputs[0] : ctx.concat_cols(head_outputs);
  return ctx.matmul(concat, p.wo);
}

Value transformer_block(GradientContext& ctx, Value z, const BoundBlock& p,
                        const AttentionTap& tap, bool order_independent) {
  Value attended = msa(ctx, ctx.layer_norm(z, p.ln1_gain, p.ln1_bias, kLayerNormEps), p.attn, tap,
                       order_independent);
  Value z_mid = ctx.add(attended, z);
  Value hidden = ctx.gelu(
      ctx.add_rowvec(ctx.matmul(ctx.layer_norm(z_mid, p.ln2_gain, p.ln2_bias, kLayerNormEps),
                                p.mlp_w1),
                     p.mlp_b1));
  Value mlp_out = ctx.add_rowvec(ctx.matmul(hidden, p.mlp_w2), p.mlp_b2);
  return ctx.add(mlp_out, z_mid);
}

}  // namespace sgt::model
