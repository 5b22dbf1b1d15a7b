#pragma once

#include <filesystem>
#include <vector>

#include "sgt/classifier.hpp"
#include "sgt/patch_graph.hpp"

namespace sgt::rel {

using num::Tensor;

// Per-block attention state captured for one explained input: A^(ℓ) and the
// gradient of the target-class logit with respect to it, both heads×T×T with
// the class token at index 0.
struct AttentionRecord {
  std::size_t tokens = 0;  // T = pooled nodes + 1
  std::size_t heads = 0;
  std::vector<Tensor> attention;  // [block] heads×T×T
  std::vector<Tensor> gradient;   // [block] heads×T×T
  Tensor assignment;              // S: N×N_p from the same forward pass
  Tensor logits;                  // 1×2
};

// One forward pass retaining every attention matrix, one backward pass from
// the target-class logit. target_class must be 0 or 1.
AttentionRecord record_attention_gradients(const model::ClassifierParams& params,
                                           const graph::Graph& g, int target_class);

// Ā^(ℓ) = mean over heads of (∇A^(ℓ) ⊙ A^(ℓ)) + I. No clamping.
Tensor block_relevance(const AttentionRecord& record, std::size_t block);

// C_t = Ā^(1)·Ā^(2)·…·Ā^(L) in written order.
Tensor chain_relevance(const AttentionRecord& record);

// Class-token relevance over clusters: row 0 of C_t with column 0 dropped.
Tensor cluster_relevance(const Tensor& chained);

// node_relevance = S · cluster_relevance (linear in the relevance vector).
Tensor reverse_pool(const Tensor& cluster_rel, const Tensor& assignment);

struct Heatmap {
  Tensor node_values;   // raw relevance per node (length N)
  Tensor patch_values;  // g_r×g_c min-max normalized to [0,1]; constant → 0.5
};

Heatmap rasterize_heatmap(const Tensor& node_relevance, const graph::PatchGrid& grid);

// Pixel-resolution heatmap by nearest-patch replication.
Tensor upsample_heatmap(const Heatmap& map, const graph::PatchGrid& grid);

// Output files: patch- and pixel-resolution PGM, CSV "row,col,value" of raw
// node relevance, and a PPM overlay blending the heatmap over the input at
// alpha 0.5.
void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& map,
                       const graph::PatchGrid& grid);
void write_overlay_ppm(const std::filesystem::path& path, const Tensor& image,
                       const Heatmap& map, const graph::PatchGrid& grid);

// Full explanation for one image through a frozen encoder + classifier.
struct Explanation {
  Heatmap heatmap;
  Tensor chained;  // C_t
  double probability_fake = 0.0;
  int predicted = 0;
};

Explanation explain(const model::ClassifierParams& classifier, const graph::Graph& g,
                    const graph::PatchGrid& grid, int target_class);

}  // namespace sgt::rel
