#pragma once

#include <string>
#include <vector>

#include "sgt/grad.hpp"
#include "sgt/rng.hpp"

namespace sgt::model {

using num::GradientContext;
using num::Tensor;
using num::Value;

inline constexpr double kLayerNormEps = 1e-5;

// Per-head projections; wq/wk/wv are D×d_head with d_head = D/heads, and
// wo is (heads·d_head)×D.
struct AttentionParams {
  std::vector<Tensor> wq, wk, wv;
  Tensor wo;
};

// Pre-norm residual block: z' = MSA(LN(z)) + z, z = MLP(LN(z')) + z'.
struct TransformerBlockParams {
  Tensor ln1_gain, ln1_bias;
  AttentionParams attn;
  Tensor ln2_gain, ln2_bias;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct BoundAttention {
  std::vector<Value> wq, wk, wv;
  Value wo;
};

struct BoundBlock {
  Value ln1_gain, ln1_bias;
  BoundAttention attn;
  Value ln2_gain, ln2_bias;
  Value mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

// Hooks into the per-head post-softmax attention matrices: `record` collects
// them (for relevancy maps); `override_probs` substitutes externally supplied
// matrices for the computed ones, which turns attention into a leaf for
// finite-difference probes.
struct AttentionTap {
  std::vector<Value>* record = nullptr;
  const std::vector<Value>* override_probs = nullptr;
};

// Multi-head self-attention: per head softmax(Q Kᵀ/√d_k)·V, heads
// concatenated and projected through wo. order_independent selects
// token-permutation-exact reductions (sorted softmax sums and P·V folds).
Value msa(GradientContext& ctx, Value tokens, const BoundAttention& p,
          const AttentionTap& tap = {}, bool order_independent = false);

Value transformer_block(GradientContext& ctx, Value z, const BoundBlock& p,
                        const AttentionTap& tap = {}, bool order_independent = false);

AttentionParams init_attention(std::size_t dim, std::size_t heads, num::Rng& rng);
TransformerBlockParams init_block(std::size_t dim, std::size_t heads, std::size_t mlp_dim,
                                  num::Rng& rng);

using TensorVisitor = std::function<void(const std::string&, Tensor&)>;
void visit_attention(AttentionParams& p, const std::string& prefix, const TensorVisitor& fn);
void visit_block(TransformerBlockParams& p, const std::string& prefix, const TensorVisitor& fn);

BoundAttention bind_attention(GradientContext& ctx, const AttentionParams& p, bool tracked,
                              const std::string& prefix);
BoundBlock bind_block(GradientContext& ctx, const TransformerBlockParams& p, bool tracked,
                      const std::string& prefix);

// Weight initialisation: N(0, 0.02) entries.
Tensor init_weight(std::vector<std::size_t> shape, num::Rng& rng);
// Glorot-uniform initialisation for layers whose output scale must survive
// a softmax (projection heads, assignment layers).
Tensor glorot_weight(std::vector<std::size_t> shape, num::Rng& rng);

}  // namespace sgt::model
