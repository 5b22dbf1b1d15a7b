#pragma once

#include <cstdint>
#include <string>

#include "sgt/classifier_train.hpp"
#include "sgt/pretrain.hpp"

namespace sgt::run {

// One flat configuration drives every command; every field is validated
// before any work starts. Unknown keys in a config file are rejected.
struct RunConfig {
  std::uint64_t seed = 42;

  // Synthetic data
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::size_t n_train = 512;
  std::size_t n_test = 256;

  // Patch graph
  std::size_t knn_k = 8;

  // Encoder backbone
  std::size_t encoder_dim = 64;
  std::size_t encoder_heads = 4;
  std::size_t encoder_depth = 4;
  std::size_t encoder_mlp_dim = 128;

  // Self-distillation
  std::size_t prototypes = 256;
  std::size_t proj_hidden = 128;
  double mask_ratio = 0.4;
  double student_temp = 0.1;
  double teacher_temp = 0.04;
  double ema_momentum = 0.996;
  double center_momentum = 0.9;

  // Augmentation
  double aug_crop_min = 0.6;
  double aug_crop_max = 1.0;
  double aug_flip_prob = 0.5;
  double aug_brightness_min = 0.8;
  double aug_brightness_max = 1.25;

  // Pre-training optimization
  double lr_base = 5e-4;
  double lr_multiplier = 40.0;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t pretrain_epochs = 20;

  // Classifier
  std::size_t gcn_layers = 3;
  std::size_t transformer_blocks = 3;
  std::size_t heads = 4;
  std::size_t model_dim = 128;
  std::size_t mlp_dim = 256;
  std::size_t clusters = 16;
  double aux_weight = 1.0;
  double classifier_lr = 0.02;
  std::size_t classifier_batch = 16;
  std::size_t train_epochs = 50;

  // Paths
  std::string data_dir = "data";
  std::string checkpoint_dir = "checkpoints";
  std::string output_dir = "out";

  // Command inputs
  std::string eval_manifest;       // empty → <data_dir>/test_manifest.json
  std::string corrupt_kind = "none";
  int corrupt_level = 3;
  std::string input_image;         // explain / graph-dump source
  int target_class = 1;

  // Merges the JSON object over the defaults; throws ConfigError on unknown
  // keys, type mismatches, or failed validation.
  static RunConfig from_json(const std::string& json_text);
  std::string to_json() const;
  void validate() const;

  std::size_t tokens() const { return (image_size / patch_size) * (image_size / patch_size); }
  double effective_lr() const;

  ssl::EncoderConfig encoder_config() const;
  ssl::DistillConfig distill_config() const;
  ssl::AugmentConfig augment_config() const;
  ssl::PretrainConfig pretrain_config() const;
  model::ClassifierConfig classifier_config() const;
  model::ClassifierTrainConfig classifier_train_config() const;
};

}  // namespace sgt::run
