#include "sgt/relevancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sgt/errors.hpp"
#include "sgt/netpbm.hpp"
#include "sgt/tensor_io.hpp"

namespace sgt::rel {

AttentionRecord record_attention_gradients(const model::ClassifierParams& params,
                                           const graph::Graph& g, int target_class) {
  if (target_class != 0 && target_class != 1) {
    throw ConfigError("record_attention_gradients: target class must be 0 or 1, got " +
                      std::to_string(target_class));
  }
  num::GradientContext ctx;
  model::BoundClassifier bound = model::bind_classifier(ctx, params, true, "clf");
  model::ForwardResult fwd = model::classifier_forward(ctx, g, bound);
  ctx.backward(ctx.select_element(fwd.logits, 0, static_cast<std::size_t>(target_class)));

  AttentionRecord record;
  record.heads = params.config.heads;
  record.tokens = params.config.clusters + 1;
  record.assignment = ctx.value(fwd.pool.assign);
  record.logits = ctx.value(fwd.logits);
  const std::size_t t = record.tokens;
  for (const auto& block : fwd.attention) {
    Tensor attn({record.heads, t, t});
    Tensor grad({record.heads, t, t});
    for (std::size_t h = 0; h < block.size(); ++h) {
      const Tensor& a = ctx.value(block[h]);
      const Tensor da = ctx.grad(block[h]);
      if (!da.all_finite()) throw NumericError("record_attention_gradients: non-finite gradient");
      std::copy(a.data(), a.data() + a.size(), attn.data() + h * t * t);
      std::copy(da.data(), da.data() + da.size(), grad.data() + h * t * t);
    }
    record.attention.push_back(std::move(attn));
    record.gradient.push_back(std::move(grad));
  }
  return record;
}

Tensor block_relevance(const AttentionRecord& record, std::size_t block) {
  const std::size_t t = record.tokens, heads = record.heads;
  const Tensor& a = record.attention.at(block);
  const Tensor& g = record.gradient.at(block);
  Tensor out({t, t});
  const double inv_heads = 1.0 / static_cast<double>(heads);
  for (std::size_t i = 0; i < t * t; ++i) {
    double acc = 0.0;
    for (std::size_t h = 0; h < heads; ++h) acc += g[h * t * t + i] * a[h * t * t + i];
    out[i] = acc * inv_heads;
  }
  for (std::size_t i = 0; i < t; ++i) out.at(i, i) += 1.0;
  return out;
}

Tensor chain_relevance(const AttentionRecord& record) {
  Tensor chained = block_relevance(record, 0);
  for (std::size_t b = 1; b < record.attention.size(); ++b) {
    chained = num::matmul(chained, block_relevance(record, b));
  }
  return chained;
}

Tensor cluster_relevance(const Tensor& chained) {
  const std::size_t t = chained.rows();
  Tensor out({t - 1});
  for (std::size_t j = 1; j < t; ++j) out[j - 1] = chained.at(0, j);
  return out;
}

Tensor reverse_pool(const Tensor& cluster_rel, const Tensor& assignment) {
  if (cluster_rel.rank() != 1 || assignment.rank() != 2 ||
      assignment.cols() != cluster_rel.size()) {
    throw ShapeError("reverse_pool: assignment " + assignment.shape_str() +
                     " does not match relevance " + cluster_rel.shape_str());
  }
  Tensor out({assignment.rows()});
  for (std::size_t i = 0; i < assignment.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < assignment.cols(); ++c) acc += assignment.at(i, c) * cluster_rel[c];
    out[i] = acc;
  }
  return out;
}

Heatmap rasterize_heatmap(const Tensor& node_relevance, const graph::PatchGrid& grid) {
  if (node_relevance.size() != grid.count()) {
    throw ShapeError("rasterize_heatmap: relevance length " + node_relevance.shape_str() +
                     " does not match grid with " + std::to_string(grid.count()) + " patches");
  }
  Heatmap map;
  map.node_values = node_relevance;
  map.patch_values = Tensor({grid.rows, grid.cols});
  double lo = node_relevance[0], hi = node_relevance[0];
  for (std::size_t i = 0; i < node_relevance.size(); ++i) {
    lo = std::min(lo, node_relevance[i]);
    hi = std::max(hi, node_relevance[i]);
  }
  for (std::size_t i = 0; i < node_relevance.size(); ++i) {
    map.patch_values[i] = hi > lo ? (node_relevance[i] - lo) / (hi - lo) : 0.5;
  }
  return map;
}

Tensor upsample_heatmap(const Heatmap& map, const graph::PatchGrid& grid) {
  Tensor out({grid.image_h, grid.image_w});
  for (std::size_t y = 0; y < grid.image_h; ++y)
    for (std::size_t x = 0; x < grid.image_w; ++x)
      out[y * grid.image_w + x] = map.patch_values.at(y / grid.patch, x / grid.patch);
  return out;
}

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& map,
                       const graph::PatchGrid& grid) {
  std::ostringstream os;
  os << "row,col,value\n";
  char buf[96];
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", r, c,
                    map.node_values[r * grid.cols + c]);
      os << buf;
    }
  }
  num::write_text_file(path, os.str());
}

void write_overlay_ppm(const std::filesystem::path& path, const Tensor& image,
                       const Heatmap& map, const graph::PatchGrid& grid) {
  Tensor heat = upsample_heatmap(map, grid);
  Tensor overlay = image;
  for (std::size_t y = 0; y < grid.image_h; ++y)
    for (std::size_t x = 0; x < grid.image_w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double& px = overlay[(y * grid.image_w + x) * 3 + c];
        px = 0.5 * px + 0.5 * heat[y * grid.image_w + x];
      }
  data::save_ppm(path, overlay);
}

Explanation explain(const model::ClassifierParams& classifier, const graph::Graph& g,
                    const graph::PatchGrid& grid, int target_class) {
  AttentionRecord record = record_attention_gradients(classifier, g, target_class);
  Explanation out;
  out.chained = chain_relevance(record);
  Tensor node_rel = reverse_pool(cluster_relevance(out.chained), record.assignment);
  out.heatmap = rasterize_heatmap(node_rel, grid);
  Tensor probs = num::softmax_rows(record.logits);
  out.probability_fake = probs[1];
  out.predicted = probs[1] > 0.5 ? 1 : 0;
  return out;
}

}  // namespace sgt::rel
