#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sgt/distill.hpp"
#include "sgt/optimizer.hpp"
#include "sgt/synth.hpp"

namespace sgt::ssl {

struct PretrainConfig {
  EncoderConfig encoder;
  DistillConfig distill;
  AugmentConfig augment;
  double mask_ratio = 0.4;
  double lr_base = 5e-4;
  double lr_multiplier = 1.0;  // extra scale on top of the batch rule
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 42;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss_cls = 0.0;
  double loss_mim = 0.0;
  double total = 0.0;
  double teacher_entropy = 0.0;  // entropy of the mean teacher CLS distribution
};

struct PretrainResult {
  StudentTeacherState state;
  std::vector<EpochStats> trace;
};

// Self-distillation pre-training over the image set (labels ignored).
// Deterministic in cfg.seed. Throws NumericError naming the first non-finite
// tensor if training diverges.
PretrainResult pretrain(const std::vector<data::Sample>& dataset, const PretrainConfig& cfg,
                        const std::function<void(const EpochStats&)>& on_epoch = {});

// Encoder checkpoint: <base>.json manifest (config + tensor names in order)
// plus <base>.tensors payload in the tensor-stream format.
void save_encoder_checkpoint(const std::filesystem::path& base, const EncoderParams& encoder);
EncoderParams load_encoder_checkpoint(const std::filesystem::path& base);

std::string loss_trace_csv(const std::vector<EpochStats>& trace);

}  // namespace sgt::ssl
