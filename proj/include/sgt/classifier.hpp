#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sgt/attention.hpp"
#include "sgt/patch_graph.hpp"

namespace sgt::model {

struct ClassifierConfig {
  std::size_t input_dim = 64;   // node feature width from the frozen encoder
  std::size_t gcn_layers = 3;
  std::size_t model_dim = 128;  // D
  std::size_t heads = 4;
  std::size_t blocks = 3;       // Transformer depth L
  std::size_t mlp_dim = 256;
  std::size_t clusters = 16;    // pooled node count N_p
  double aux_weight = 1.0;      // λ on the pooling losses
  void validate() const;
};

// GCN stack + min-cut pooling + Transformer with class token + binary head.
struct ClassifierParams {
  ClassifierConfig config;
  std::vector<Tensor> gcn_weights;  // layer l: D_in×D_out
  Tensor pool_weight, pool_bias;    // assignment affine: D×N_p, N_p
  Tensor cls_token;                 // 1×D
  std::vector<TransformerBlockParams> blocks;
  Tensor final_gain, final_bias;    // LN on the final class-token state
  Tensor head_weight, head_bias;    // D×2, 2

  static ClassifierParams init(const ClassifierConfig& cfg, std::uint64_t seed);
  void visit(const std::string& prefix, const TensorVisitor& fn);
};

struct BoundClassifier {
  ClassifierConfig config;
  std::vector<Value> gcn_weights;
  Value pool_weight, pool_bias;
  Value cls_token;
  std::vector<BoundBlock> blocks;
  Value final_gain, final_bias;
  Value head_weight, head_bias;
};

BoundClassifier bind_classifier(GradientContext& ctx, const ClassifierParams& p, bool tracked,
                                const std::string& prefix);

// H_{l+1} = ReLU(Â H_l W_l); node-indexed reductions use order-independent
// accumulation so results are exactly permutation-equivariant.
Value gcn_forward(GradientContext& ctx, Value features, Value norm_adj,
                  const std::vector<Value>& weights);

struct PoolResult {
  Value pooled;      // N_p×D
  Value assign;      // S: N×N_p, rows stochastic
  Value cut_loss;    // −Tr(SᵀÃS)/Tr(SᵀD̃S)
  Value ortho_loss;  // ‖SᵀS/‖SᵀS‖_F − I/√N_p‖_F
  Tensor pooled_adj; // SᵀÂS, diagonal zeroed, degree-renormalized
};

// Cut and orthogonality regularizers for a given assignment matrix
// (rows stochastic). Ã = A+I and D̃ are derived from the boolean adjacency.
struct PoolLosses {
  Value cut;
  Value ortho;
};
PoolLosses mincut_losses(GradientContext& ctx, Value assign, const Tensor& adjacency);

// adjacency is the boolean A (zero diagonal); norm_adj its Â.
PoolResult mincut_pool(GradientContext& ctx, Value h, const Tensor& adjacency, Value norm_adj,
                       const BoundClassifier& p);

// Substitutes externally supplied per-head attention matrices (outer index:
// block; an empty inner vector leaves that block computed naturally) — used
// to treat attention as a leaf in gradient probes.
struct AttentionOverride {
  std::vector<std::vector<Value>> probs;
};

struct TransformerResult {
  Value logits;  // 1×2
  std::vector<std::vector<Value>> attention;  // [block][head], (N_p+1)×(N_p+1)
};

// Builds z₀ = [class token; token rows], applies the pre-norm blocks, and
// maps the layer-normed final class-token state to two logits. No positional
// term is added, so permuting the token rows leaves the logits bit-unchanged.
TransformerResult transformer_forward(GradientContext& ctx, Value tokens,
                                      const BoundClassifier& p,
                                      const AttentionOverride* override_attn = nullptr);

struct ForwardResult {
  Value logits;  // 1×2
  PoolResult pool;
  std::vector<std::vector<Value>> attention;
};

// Full pipeline: GCN → min-cut pooling → Transformer. Node-permutation
// invariant bit for bit.
ForwardResult classifier_forward(GradientContext& ctx, const graph::Graph& g,
                                 const BoundClassifier& p,
                                 const AttentionOverride* override_attn = nullptr);

// Softmax cross-entropy on the two logits plus λ·(L_cut + L_ortho).
Value classifier_loss(GradientContext& ctx, Value logits, int label, Value cut_loss,
                      Value ortho_loss, double lambda);

// Untracked single-graph evaluation.
Tensor classify_logits(const ClassifierParams& params, const graph::Graph& g);
// Probability of class 1 (fake).
double classify_probability(const ClassifierParams& params, const graph::Graph& g);

void save_classifier_checkpoint(const std::filesystem::path& base, const ClassifierParams& p);
ClassifierParams load_classifier_checkpoint(const std::filesystem::path& base);

}  // namespace sgt::model
