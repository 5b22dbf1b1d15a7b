#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sgt/vit.hpp"

namespace sgt::ssl {

// ---------------------------------------------------------------------------
// Blockwise masking
// ---------------------------------------------------------------------------

struct MaskBlock {
  std::size_t row = 0, col = 0, height = 0, width = 0;
};

struct MaskSpec {
  std::vector<std::uint8_t> mask;  // length N, 1 = masked
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::vector<MaskBlock> blocks;  // the sampled rectangles, for verification

  std::size_t masked_count() const {
    std::size_t c = 0;
    for (auto m : mask) c += m;
    return c;
  }
  std::vector<std::size_t> masked_indices() const;
};

// Samples axis-aligned rectangles (area 4..0.4·N, aspect in [1/3, 3], capped
// by the tokens still needed) until coverage reaches r. Coverage lands in
// [r, r + b_max/N] where b_max = floor(0.4·N).
MaskSpec blockwise_mask(std::size_t grid_side, double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentConfig {
  double crop_min = 0.6;  // side-length scale of the random crop
  double crop_max = 1.0;
  double flip_prob = 0.5;
  double brightness_min = 0.8;
  double brightness_max = 1.25;
};

// Two independently augmented views of the same image, deterministic in the
// seed. Crop scale 1 + no flip + brightness 1 reproduces the input exactly.
std::pair<Tensor, Tensor> augment_pair(const Tensor& image, const AugmentConfig& cfg,
                                       std::uint64_t seed);

// Bilinear resize of an H×W×C image (exposed for tests).
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

// ---------------------------------------------------------------------------
// Student / teacher state
// ---------------------------------------------------------------------------

struct DistillConfig {
  std::size_t prototypes = 256;   // projection output dimension P
  std::size_t proj_hidden = 128;  // width of the 3-layer head
  double student_temp = 0.1;
  double teacher_temp = 0.04;
  double ema_momentum = 0.996;
  double center_momentum = 0.9;
  void validate() const;
};

// Shared projection head (CLS and patch tokens go through the same one):
// affine → GELU → affine → GELU → affine to P logits.
struct ProjectionParams {
  Tensor w1, b1, w2, b2, w3, b3;
  static ProjectionParams init(std::size_t input_dim, std::size_t hidden, std::size_t prototypes,
                               std::uint64_t seed);
  void visit(const std::string& prefix, const TensorVisitor& fn);
};

struct StudentTeacherState {
  EncoderConfig encoder_config;
  DistillConfig distill;
  EncoderParams student_encoder, teacher_encoder;  // same shapes
  ProjectionParams student_head, teacher_head;
  Tensor center;  // {P}

  static StudentTeacherState init(const EncoderConfig& enc, const DistillConfig& distill,
                                  std::uint64_t seed);
  // Enumerates student tensors only: the teacher is updated by EMA, never by
  // the optimizer.
  void visit_student(const TensorVisitor& fn);
  void visit_teacher(const TensorVisitor& fn);
};

struct BoundProjection {
  Value w1, b1, w2, b2, w3, b3;
};

BoundProjection bind_projection(GradientContext& ctx, const ProjectionParams& p, bool tracked,
                                const std::string& prefix);

// Raw P-dimensional head outputs for the given embedding rows.
Value head_logits(GradientContext& ctx, Value rows, const BoundProjection& head);

// softmax((logits − center)/temperature); center only on the teacher path.
Value project(GradientContext& ctx, Value logits, double temperature, const Tensor* center);

// ---------------------------------------------------------------------------
// Losses (Eq. 1-3 shapes)
// ---------------------------------------------------------------------------

struct LossBuild {
  Value cls;    // cross-view class-token self-distillation
  Value mim;    // in-view masked patch self-distillation
  Value total;  // cls + mim
  bool mim_empty = false;        // both masks were empty
  Tensor teacher_cls_logits;     // 2×P (views u, v), pre-center, for the center update
};

// Builds the combined objective on the tape. Student runs on the masked
// views, teacher on the unmasked views; teacher values are constants.
LossBuild build_loss(GradientContext& ctx, const StudentTeacherState& state, const Tensor& view_u,
                     const Tensor& view_v, const MaskSpec& mask_u, const MaskSpec& mask_v);

// θ' ← m·θ' + (1−m)·θ elementwise.
void ema_update_teacher(StudentTeacherState& state);

// c ← ρ·c + (1−ρ)·rowmean(batch teacher CLS logits).
void update_center(StudentTeacherState& state, const Tensor& batch_teacher_logits);

// Batch-level collapse diagnostic: entropy of the mean teacher CLS
// distribution.
double teacher_mean_entropy(const Tensor& batch_teacher_probs);

// lr = base · batch/256 (§ hyperparameter scaling rule).
double effective_lr(double lr_base, std::size_t batch_size);

}  // namespace sgt::ssl
