#include "sgt/config.hpp"

#include <set>

#include "json.hpp"
#include "sgt/corrupt.hpp"
#include "sgt/errors.hpp"

namespace sgt::run {

namespace {

// Single field table serving serialization, parsing, and key validation.
template <typename F>
void visit_config(RunConfig& c, F&& f) {
  f("seed", c.seed);
  f("image_size", c.image_size);
  f("patch_size", c.patch_size);
  f("n_train", c.n_train);
  f("n_test", c.n_test);
  f("knn_k", c.knn_k);
  f("encoder_dim", c.encoder_dim);
  f("encoder_heads", c.encoder_heads);
  f("encoder_depth", c.encoder_depth);
  f("encoder_mlp_dim", c.encoder_mlp_dim);
  f("prototypes", c.prototypes);
  f("proj_hidden", c.proj_hidden);
  f("mask_ratio", c.mask_ratio);
  f("student_temp", c.student_temp);
  f("teacher_temp", c.teacher_temp);
  f("ema_momentum", c.ema_momentum);
  f("center_momentum", c.center_momentum);
  f("aug_crop_min", c.aug_crop_min);
  f("aug_crop_max", c.aug_crop_max);
  f("aug_flip_prob", c.aug_flip_prob);
  f("aug_brightness_min", c.aug_brightness_min);
  f("aug_brightness_max", c.aug_brightness_max);
  f("lr_base", c.lr_base);
  f("lr_multiplier", c.lr_multiplier);
  f("momentum", c.momentum);
  f("batch_size", c.batch_size);
  f("pretrain_epochs", c.pretrain_epochs);
  f("gcn_layers", c.gcn_layers);
  f("transformer_blocks", c.transformer_blocks);
  f("heads", c.heads);
  f("model_dim", c.model_dim);
  f("mlp_dim", c.mlp_dim);
  f("clusters", c.clusters);
  f("aux_weight", c.aux_weight);
  f("classifier_lr", c.classifier_lr);
  f("classifier_batch", c.classifier_batch);
  f("train_epochs", c.train_epochs);
  f("data_dir", c.data_dir);
  f("checkpoint_dir", c.checkpoint_dir);
  f("output_dir", c.output_dir);
  f("eval_manifest", c.eval_manifest);
  f("corrupt_kind", c.corrupt_kind);
  f("corrupt_level", c.corrupt_level);
  f("input_image", c.input_image);
  f("target_class", c.target_class);
}

struct Writer {
  nlohmann::json& out;
  template <typename T>
  void operator()(const char* key, const T& v) {
    out[key] = v;
  }
};

struct Reader {
  const nlohmann::json& in;
  template <typename T>
  void operator()(const char* key, T& v) {
    if (!in.contains(key)) return;
    try {
      v = in.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
};

}  // namespace

std::string RunConfig::to_json() const {
  nlohmann::json j;
  Writer w{j};
  visit_config(const_cast<RunConfig&>(*this), w);
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("configuration is not a JSON object");
  }
  RunConfig cfg;
  std::set<std::string> known;
  visit_config(cfg, [&](const char* key, auto&) { known.insert(key); });
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  Reader r{j};
  visit_config(cfg, r);
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  encoder_config().validate();
  distill_config().validate();
  classifier_config().validate();

  const std::size_t n = tokens();
  if (knn_k < 1 || knn_k > n - 1) {
    throw ConfigError("knn_k=" + std::to_string(knn_k) + " outside [1, " + std::to_string(n - 1) +
                      "] for an image with " + std::to_string(n) + " patches");
  }
  if (clusters > n) {
    throw ConfigError("clusters=" + std::to_string(clusters) + " exceeds the node count " +
                      std::to_string(n));
  }
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw ConfigError("mask_ratio must lie in (0,1)");
  }
  if (n_train < 2 || n_train % 2 != 0 || n_test < 2 || n_test % 2 != 0) {
    throw ConfigError("n_train and n_test must be even and >= 2 for balanced classes");
  }
  if (batch_size == 0 || classifier_batch == 0 || pretrain_epochs == 0 || train_epochs == 0) {
    throw ConfigError("batch sizes and epoch counts must be positive");
  }
  if (lr_base <= 0.0 || lr_multiplier <= 0.0 || classifier_lr <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0,1)");
  if (!(aug_crop_min > 0.0 && aug_crop_min <= aug_crop_max && aug_crop_max <= 1.0)) {
    throw ConfigError("crop scales must satisfy 0 < min <= max <= 1");
  }
  if (aug_flip_prob < 0.0 || aug_flip_prob > 1.0) throw ConfigError("flip prob outside [0,1]");
  if (!(aug_brightness_min > 0.0 && aug_brightness_min <= aug_brightness_max)) {
    throw ConfigError("brightness range must be positive and ordered");
  }
  if (corrupt_kind != "none") data::corruption_from_string(corrupt_kind);
  if (corrupt_level < 0 || corrupt_level > data::kCorruptionLevels) {
    throw ConfigError("corrupt_level outside [0,5]");
  }
  if (target_class != 0 && target_class != 1) throw ConfigError("target_class must be 0 or 1");
  if (data_dir.empty() || checkpoint_dir.empty() || output_dir.empty()) {
    throw ConfigError("directory paths must be non-empty");
  }
}

double RunConfig::effective_lr() const {
  return ssl::effective_lr(lr_base, batch_size) * lr_multiplier;
}

ssl::EncoderConfig RunConfig::encoder_config() const {
  ssl::EncoderConfig e;
  e.image_size = image_size;
  e.patch_size = patch_size;
  e.dim = encoder_dim;
  e.heads = encoder_heads;
  e.depth = encoder_depth;
  e.mlp_dim = encoder_mlp_dim;
  return e;
}

ssl::DistillConfig RunConfig::distill_config() const {
  ssl::DistillConfig d;
  d.prototypes = prototypes;
  d.proj_hidden = proj_hidden;
  d.student_temp = student_temp;
  d.teacher_temp = teacher_temp;
  d.ema_momentum = ema_momentum;
  d.center_momentum = center_momentum;
  return d;
}

ssl::AugmentConfig RunConfig::augment_config() const {
  ssl::AugmentConfig a;
  a.crop_min = aug_crop_min;
  a.crop_max = aug_crop_max;
  a.flip_prob = aug_flip_prob;
  a.brightness_min = aug_brightness_min;
  a.brightness_max = aug_brightness_max;
  return a;
}

ssl::PretrainConfig RunConfig::pretrain_config() const {
  ssl::PretrainConfig p;
  p.encoder = encoder_config();
  p.distill = distill_config();
  p.augment = augment_config();
  p.mask_ratio = mask_ratio;
  p.lr_base = lr_base;
  p.lr_multiplier = lr_multiplier;
  p.momentum = momentum;
  p.batch_size = batch_size;
  p.epochs = pretrain_epochs;
  p.seed = seed;
  return p;
}

model::ClassifierConfig RunConfig::classifier_config() const {
  model::ClassifierConfig c;
  c.input_dim = encoder_dim;
  c.gcn_layers = gcn_layers;
  c.model_dim = model_dim;
  c.heads = heads;
  c.blocks = transformer_blocks;
  c.mlp_dim = mlp_dim;
  c.clusters = clusters;
  c.aux_weight = aux_weight;
  return c;
}

model::ClassifierTrainConfig RunConfig::classifier_train_config() const {
  model::ClassifierTrainConfig t;
  t.classifier = classifier_config();
  t.lr = classifier_lr;
  t.momentum = momentum;
  t.batch_size = classifier_batch;
  t.epochs = train_epochs;
  t.seed = seed;
  return t;
}

}  // namespace sgt::run
