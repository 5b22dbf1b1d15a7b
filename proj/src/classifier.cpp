#include "sgt/classifier.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "sgt/errors.hpp"
#include "sgt/tensor_io.hpp"

namespace sgt::model {

void ClassifierConfig::validate() const {
  if (input_dim == 0 || model_dim == 0 || mlp_dim == 0 || clusters == 0) {
    throw ConfigError("classifier: dimensions must be positive");
  }
  if (gcn_layers == 0) throw ConfigError("classifier: need at least one GCN layer");
  if (blocks == 0) throw ConfigError("classifier: need at least one Transformer block");
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("classifier: model_dim must be a positive multiple of heads");
  }
  if (aux_weight < 0.0) throw ConfigError("classifier: aux weight must be >= 0");
}

ClassifierParams ClassifierParams::init(const ClassifierConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  num::Rng rng = num::Rng::stream(seed, "init/classifier");
  ClassifierParams p;
  p.config = cfg;
  for (std::size_t l = 0; l < cfg.gcn_layers; ++l) {
    const std::size_t in = l == 0 ? cfg.input_dim : cfg.model_dim;
    p.gcn_weights.push_back(init_weight({in, cfg.model_dim}, rng));
  }
  p.pool_weight = init_weight({cfg.model_dim, cfg.clusters}, rng);
  p.pool_bias = Tensor::zeros({cfg.clusters});
  p.cls_token = init_weight({1, cfg.model_dim}, rng);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    p.blocks.push_back(init_block(cfg.model_dim, cfg.heads, cfg.mlp_dim, rng));
  }
  p.final_gain = Tensor::full({cfg.model_dim}, 1.0);
  p.final_bias = Tensor::zeros({cfg.model_dim});
  p.head_weight = init_weight({cfg.model_dim, 2}, rng);
  p.head_bias = Tensor::zeros({2});
  return p;
}

void ClassifierParams::visit(const std::string& prefix, const TensorVisitor& fn) {
  for (std::size_t l = 0; l < gcn_weights.size(); ++l) {
    fn(prefix + ".gcn.w" + std::to_string(l), gcn_weights[l]);
  }
  fn(prefix + ".pool.weight", pool_weight);
  fn(prefix + ".pool.bias", pool_bias);
  fn(prefix + ".cls", cls_token);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    visit_block(blocks[b], prefix + ".block." + std::to_string(b), fn);
  }
  fn(prefix + ".final.gain", final_gain);
  fn(prefix + ".final.bias", final_bias);
  fn(prefix + ".head.weight", head_weight);
  fn(prefix + ".head.bias", head_bias);
}

BoundClassifier bind_classifier(GradientContext& ctx, const ClassifierParams& p, bool tracked,
                                const std::string& prefix) {
  auto bind = [&](const Tensor& t, const std::string& name) {
    return tracked ? ctx.param(prefix + name, t) : ctx.constant(t);
  };
  BoundClassifier b;
  b.config = p.config;
  for (std::size_t l = 0; l < p.gcn_weights.size(); ++l) {
    b.gcn_weights.push_back(bind(p.gcn_weights[l], ".gcn.w" + std::to_string(l)));
  }
  b.pool_weight = bind(p.pool_weight, ".pool.weight");
  b.pool_bias = bind(p.pool_bias, ".pool.bias");
  b.cls_token = bind(p.cls_token, ".cls");
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    b.blocks.push_back(bind_block(ctx, p.blocks[i], tracked, prefix + ".block." + std::to_string(i)));
  }
  b.final_gain = bind(p.final_gain, ".final.gain");
  b.final_bias = bind(p.final_bias, ".final.bias");
  b.head_weight = bind(p.head_weight, ".head.weight");
  b.head_bias = bind(p.head_bias, ".head.bias");
  return b;
}

Value gcn_forward(GradientContext& ctx, Value features, Value norm_adj,
                  const std::vector<Value>& weights) {
  Value h = features;
  for (const Value& w : weights) {
    h = ctx.relu(ctx.matmul_nodesum(norm_adj, ctx.matmul(h, w)));
  }
  return h;
}

PoolLosses mincut_losses(GradientContext& ctx, Value assign, const Tensor& adjacency) {
  const std::size_t n = adjacency.rows();
  const std::size_t clusters = ctx.value(assign).cols();

  // Ã = A + I and its degree diagonal D̃.
  Tensor a_tilde = adjacency;
  Tensor d_tilde({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    a_tilde.at(i, i) += 1.0;
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a_tilde.at(i, j);
    d_tilde.at(i, i) = deg;
  }
  PoolLosses out;
  Value at_s = ctx.matmul(ctx.constant(a_tilde), assign);
  Value dt_s = ctx.matmul(ctx.constant(d_tilde), assign);
  Value cut_num = ctx.sum_all(ctx.mul(at_s, assign));  // Tr(SᵀÃS)
  Value cut_den = ctx.sum_all(ctx.mul(dt_s, assign));  // Tr(SᵀD̃S)
  out.cut = ctx.scale(ctx.div(cut_num, cut_den), -1.0);

  Value gram = ctx.matmul(ctx.transpose(assign), assign);  // SᵀS
  Value gram_norm = ctx.sqrt_elem(ctx.sum_all(ctx.mul(gram, gram)));
  Value normalized = ctx.div_by_scalar(gram, gram_norm);
  Value residual = ctx.sub(
      normalized,
      ctx.constant(num::scale(Tensor::identity(clusters),
                              1.0 / std::sqrt(static_cast<double>(clusters)))));
  out.ortho = ctx.sqrt_elem(ctx.sum_all(ctx.mul(residual, residual)));
  return out;
}

PoolResult mincut_pool(GradientContext& ctx, Value h, const Tensor& adjacency, Value norm_adj,
                       const BoundClassifier& p) {
  const std::size_t n = adjacency.rows();
  const std::size_t clusters = p.config.clusters;
  if (n < clusters) {
    throw ConfigError("mincut_pool: node count " + std::to_string(n) +
                      " smaller than cluster count " + std::to_string(clusters));
  }

  PoolResult out;
  out.assign = ctx.softmax_rows(ctx.add_rowvec(ctx.matmul(h, p.pool_weight), p.pool_bias));
  Value assign_t = ctx.transpose(out.assign);
  out.pooled = ctx.matmul_nodesum(assign_t, h);

  PoolLosses losses = mincut_losses(ctx, out.assign, adjacency);
  out.cut_loss = losses.cut;
  out.ortho_loss = losses.ortho;

  // Pooled adjacency: SᵀÂS with zeroed diagonal, symmetric degree
  // renormalization. Not part of the logits path; computed from values.
  const Tensor& s_val = ctx.value(out.assign);
  Tensor coarse = num::matmul_sorted(num::matmul_sorted(num::transpose(s_val),
                                                        ctx.value(norm_adj)),
                                     s_val);
  for (std::size_t i = 0; i < clusters; ++i) coarse.at(i, i) = 0.0;
  std::vector<double> deg(clusters, 0.0);
  for (std::size_t i = 0; i < clusters; ++i)
    for (std::size_t j = 0; j < clusters; ++j) deg[i] += coarse.at(i, j);
  for (std::size_t i = 0; i < clusters; ++i) {
    for (std::size_t j = 0; j < clusters; ++j) {
      const double d = deg[i] * deg[j];
      coarse.at(i, j) = d > 0.0 ? coarse.at(i, j) / std::sqrt(d) : 0.0;
    }
  }
  out.pooled_adj = std::move(coarse);
  return out;
}

TransformerResult transformer_forward(GradientContext& ctx, Value tokens,
                                      const BoundClassifier& p,
                                      const AttentionOverride* override_attn) {
  TransformerResult out;
  Value z = ctx.concat_rows(p.cls_token, tokens);
  out.attention.resize(p.blocks.size());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    AttentionTap tap;
    tap.record = &out.attention[b];
    if (override_attn) tap.override_probs = &override_attn->probs[b];
    z = transformer_block(ctx, z, p.blocks[b], tap, /*order_independent=*/true);
  }
  Value y = ctx.layer_norm(ctx.slice_rows(z, 0, 1), p.final_gain, p.final_bias, kLayerNormEps);
  out.logits = ctx.add_rowvec(ctx.matmul(y, p.head_weight), p.head_bias);
  return out;
}

ForwardResult classifier_forward(GradientContext& ctx, const graph::Graph& g,
                                 const BoundClassifier& p,
                                 const AttentionOverride* override_attn) {
  if (g.features.cols() != ctx.value(p.gcn_weights[0]).rows()) {
    throw ShapeError("classifier_forward: feature width " + g.features.shape_str() +
                     " does not match the first GCN layer");
  }
  ForwardResult out;
  Value features = ctx.constant(g.features);
  Value norm_adj = ctx.constant(g.normalized);
  Value h = gcn_forward(ctx, features, norm_adj, p.gcn_weights);
  out.pool = mincut_pool(ctx, h, g.adjacency, norm_adj, p);
  TransformerResult trans = transformer_forward(ctx, out.pool.pooled, p, override_attn);
  out.logits = trans.logits;
  out.attention = std::move(trans.attention);
  return out;
}

Value classifier_loss(GradientContext& ctx, Value logits, int label, Value cut_loss,
                      Value ortho_loss, double lambda) {
  if (label != 0 && label != 1) {
    throw ConfigError("classifier_loss: label must be 0 or 1, got " + std::to_string(label));
  }
  Tensor onehot({1, 2});
  onehot[static_cast<std::size_t>(label)] = 1.0;
  Value ce = ctx.cross_entropy_rows(ctx.constant(onehot), ctx.softmax_rows(logits));
  Value aux = ctx.scale(ctx.add(cut_loss, ortho_loss), lambda);
  return ctx.add(ce, aux);
}

Tensor classify_logits(const ClassifierParams& params, const graph::Graph& g) {
  GradientContext ctx;
  BoundClassifier bound = bind_classifier(ctx, params, false, "clf");
  ForwardResult fwd = classifier_forward(ctx, g, bound);
  return ctx.value(fwd.logits);
}

double classify_probability(const ClassifierParams& params, const graph::Graph& g) {
  return num::softmax_rows(classify_logits(params, g))[1];
}

void save_classifier_checkpoint(const std::filesystem::path& base, const ClassifierParams& p) {
  std::vector<num::NamedTensor> tensors;
  ClassifierParams copy = p;
  copy.visit("classifier", [&](const std::string& name, Tensor& t) {
    tensors.push_back({name, t});
  });
  std::filesystem::path tensor_path = base;
  tensor_path += ".tensors";
  num::write_tensors_file(tensor_path, tensors);

  nlohmann::json manifest;
  manifest["kind"] = "classifier";
  manifest["config"] = {{"input_dim", p.config.input_dim},   {"gcn_layers", p.config.gcn_layers},
                        {"model_dim", p.config.model_dim},   {"heads", p.config.heads},
                        {"blocks", p.config.blocks},         {"mlp_dim", p.config.mlp_dim},
                        {"clusters", p.config.clusters},     {"aux_weight", p.config.aux_weight}};
  std::vector<std::string> names;
  for (const auto& nt : tensors) names.push_back(nt.name);
  manifest["tensors"] = names;
  std::filesystem::path json_path = base;
  json_path += ".json";
  num::write_text_file(json_path, manifest.dump(2) + "\n");
}

ClassifierParams load_classifier_checkpoint(const std::filesystem::path& base) {
  std::filesystem::path json_path = base;
  json_path += ".json";
  std::ifstream is(json_path);
  if (!is) throw DataError("cannot open checkpoint manifest '" + json_path.string() + "'");
  nlohmann::json manifest = nlohmann::json::parse(is, nullptr, false);
  if (manifest.is_discarded() || manifest.value("kind", "") != "classifier") {
    throw DataError("'" + json_path.string() + "' is not a classifier checkpoint manifest");
  }
  ClassifierConfig cfg;
  const auto& c = manifest.at("config");
  cfg.input_dim = c.at("input_dim").get<std::size_t>();
  cfg.gcn_layers = c.at("gcn_layers").get<std::size_t>();
  cfg.model_dim = c.at("model_dim").get<std::size_t>();
  cfg.heads = c.at("heads").get<std::size_t>();
  cfg.blocks = c.at("blocks").get<std::size_t>();
  cfg.mlp_dim = c.at("mlp_dim").get<std::size_t>();
  cfg.clusters = c.at("clusters").get<std::size_t>();
  cfg.aux_weight = c.at("aux_weight").get<double>();

  ClassifierParams params = ClassifierParams::init(cfg, 0);
  std::filesystem::path tensor_path = base;
  tensor_path += ".tensors";
  auto tensors = num::read_tensors_file(tensor_path);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = &nt.tensor;
  params.visit("classifier", [&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint missing tensor '" + name + "'");
    if (!it->second->same_shape(t)) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + it->second->shape_str() +
                      ", expected " + t.shape_str());
    }
    t = *it->second;
  });
  return params;
}

}  // namespace sgt::model
