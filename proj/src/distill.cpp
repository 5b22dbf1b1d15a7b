#include "sgt/distill.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgt/errors.hpp"

namespace sgt::ssl {

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

std::vector<std::size_t> MaskSpec::masked_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return idx;
}

MaskSpec blockwise_mask(std::size_t grid_side, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("blockwise_mask: ratio must lie in (0,1), got " + std::to_string(ratio));
  }
  const std::size_t n = grid_side * grid_side;
  const std::size_t min_area = std::min<std::size_t>(4, n);
  const std::size_t max_area =
      std::max(min_area, static_cast<std::size_t>(0.4 * static_cast<double>(n)));

  // Legal rectangles: area in [min_area, max_area], aspect h/w in [1/3, 3]
  // (exact integer comparison), fitting the grid.
  std::vector<std::pair<std::size_t, std::size_t>> rects;
  for (std::size_t h = 1; h <= grid_side; ++h) {
    for (std::size_t w = 1; w <= grid_side; ++w) {
      const std::size_t area = h * w;
      if (area < min_area || area > max_area) continue;
      if (3 * w < h || 3 * h < w) continue;
      rects.emplace_back(h, w);
    }
  }

  const std::size_t target = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n)));
  num::Rng rng(seed);
  MaskSpec spec;
  spec.mask.assign(n, 0);
  spec.ratio = ratio;
  spec.seed = seed;

  std::size_t covered = 0;
  while (covered < target) {
    const std::size_t needed = target - covered;
    const std::size_t cap = std::clamp(needed, min_area, max_area);
    // Choose among rectangles no larger than the remaining need (the
    // smallest legal rectangle always qualifies).
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < rects.size(); ++i)
      if (rects[i].first * rects[i].second <= cap) candidates.push_back(i);
    const auto [h, w] = rects[candidates[rng.below(candidates.size())]];
    const std::size_t r0 = rng.below(grid_side - h + 1);
    const std::size_t c0 = rng.below(grid_side - w + 1);
    spec.blocks.push_back(MaskBlock{r0, c0, h, w});
    for (std::size_t r = r0; r < r0 + h; ++r) {
      for (std::size_t c = c0; c < c0 + w; ++c) {
        if (!spec.mask[r * grid_side + c]) {
          spec.mask[r * grid_side + c] = 1;
          ++covered;
        }
      }
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  if (out_h == h && out_w == w) return image;
  Tensor out({out_h, out_w, c});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v00 = image[(y0 * w + x0) * c + ch];
        const double v01 = image[(y0 * w + x1) * c + ch];
        const double v10 = image[(y1 * w + x0) * c + ch];
        const double v11 = image[(y1 * w + x1) * c + ch];
        out[(y * out_w + x) * c + ch] =
            (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * ((1.0 - wx) * v10 + wx * v11);
      }
    }
  }
  return out;
}

namespace {

Tensor augment_once(const Tensor& image, const AugmentConfig& cfg, num::Rng& rng) {
  const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  const double scale = rng.uniform(cfg.crop_min, cfg.crop_max);
  const std::size_t ch = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(scale * static_cast<double>(h))));
  const std::size_t cw = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(scale * static_cast<double>(w))));
  const std::size_t top = rng.below(h - ch + 1);
  const std::size_t left = rng.below(w - cw + 1);
  const bool flip = rng.bernoulli(cfg.flip_prob);
  const double brightness = rng.uniform(cfg.brightness_min, cfg.brightness_max);

  Tensor view;
  if (ch == h && cw == w) {
    view = image;
  } else {
    Tensor crop({ch, cw, c});
    for (std::size_t y = 0; y < ch; ++y) {
      const std::size_t src = ((top + y) * w + left) * c;
      std::copy(image.data() + src, image.data() + src + cw * c, crop.data() + y * cw * c);
    }
    view = resize_bilinear(crop, h, w);
  }
  if (flip) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w / 2; ++x)
        for (std::size_t chn = 0; chn < c; ++chn)
          std::swap(view[(y * w + x) * c + chn], view[(y * w + (w - 1 - x)) * c + chn]);
  }
  if (brightness != 1.0) {
    for (std::size_t i = 0; i < view.size(); ++i)
      view[i] = std::clamp(view[i] * brightness, 0.0, 1.0);
  }
  return view;
}

}  // namespace

std::pair<Tensor, Tensor> augment_pair(const Tensor& image, const AugmentConfig& cfg,
                                       std::uint64_t seed) {
  num::Rng rng(seed);
  Tensor u = augment_once(image, cfg, rng);
  Tensor v = augment_once(image, cfg, rng);
  return {std::move(u), std::move(v)};
}

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

void DistillConfig::validate() const {
  if (prototypes == 0 || proj_hidden == 0) throw ConfigError("distill: dims must be positive");
  if (student_temp <= 0.0 || teacher_temp <= 0.0) {
    throw ConfigError("distill: temperatures must be positive");
  }
  if (ema_momentum < 0.0 || ema_momentum > 1.0 || center_momentum < 0.0 || center_momentum > 1.0) {
    throw ConfigError("distill: momenta must lie in [0,1]");
  }
}

ProjectionParams ProjectionParams::init(std::size_t input_dim, std::size_t hidden,
                                        std::size_t prototypes, std::uint64_t seed) {
  num::Rng rng = num::Rng::stream(seed, "init/projection");
  ProjectionParams p;
  // Glorot so the prototype logits carry enough spread for the sharpened
  // teacher softmax to produce informative targets from the first step.
  p.w1 = model::glorot_weight({input_dim, hidden}, rng);
  p.b1 = Tensor::zeros({hidden});
  p.w2 = model::glorot_weight({hidden, hidden}, rng);
  p.b2 = Tensor::zeros({hidden});
  p.w3 = model::glorot_weight({hidden, prototypes}, rng);
  p.b3 = Tensor::zeros({prototypes});
  return p;
}

void ProjectionParams::visit(const std::string& prefix, const TensorVisitor& fn) {
  fn(prefix + ".w1", w1);
  fn(prefix + ".b1", b1);
  fn(prefix + ".w2", w2);
  fn(prefix + ".b2", b2);
  fn(prefix + ".w3", w3);
  fn(prefix + ".b3", b3);
}

StudentTeacherState StudentTeacherState::init(const EncoderConfig& enc,
                                              const DistillConfig& distill, std::uint64_t seed) {
  distill.validate();
  StudentTeacherState s;
  s.encoder_config = enc;
  s.distill = distill;
  s.student_encoder = EncoderParams::init(enc, seed);
  s.student_head = ProjectionParams::init(enc.dim, distill.proj_hidden, distill.prototypes, seed);
  // Teacher starts as an exact copy of the student.
  s.teacher_encoder = s.student_encoder;
  s.teacher_head = s.student_head;
  s.center = Tensor::zeros({distill.prototypes});
  return s;
}

void StudentTeacherState::visit_student(const TensorVisitor& fn) {
  student_encoder.visit("student.encoder", fn);
  student_head.visit("student.head", fn);
}

void StudentTeacherState::visit_teacher(const TensorVisitor& fn) {
  teacher_encoder.visit("teacher.encoder", fn);
  teacher_head.visit("teacher.head", fn);
}

BoundProjection bind_projection(GradientContext& ctx, const ProjectionParams& p, bool tracked,
                                const std::string& prefix) {
  auto bind = [&](const Tensor& t, const char* name) {
    return tracked ? ctx.param(prefix + name, t) : ctx.constant(t);
  };
  BoundProjection b;
  b.w1 = bind(p.w1, ".w1");
  b.b1 = bind(p.b1, ".b1");
  b.w2 = bind(p.w2, ".w2");
  b.b2 = bind(p.b2, ".b2");
  b.w3 = bind(p.w3, ".w3");
  b.b3 = bind(p.b3, ".b3");
  return b;
}

Value head_logits(GradientContext& ctx, Value rows, const BoundProjection& head) {
  Value h1 = ctx.gelu(ctx.add_rowvec(ctx.matmul(rows, head.w1), head.b1));
  Value h2 = ctx.gelu(ctx.add_rowvec(ctx.matmul(h1, head.w2), head.b2));
  return ctx.add_rowvec(ctx.matmul(h2, head.w3), head.b3);
}

Value project(GradientContext& ctx, Value logits, double temperature, const Tensor* center) {
  if (temperature <= 0.0) throw ConfigError("project: temperature must be positive");
  Value shifted = center ? ctx.sub_rowvec(logits, ctx.constant(*center)) : logits;
  return ctx.softmax_rows(ctx.scale(shifted, 1.0 / temperature));
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

LossBuild build_loss(GradientContext& ctx, const StudentTeacherState& state, const Tensor& view_u,
                     const Tensor& view_v, const MaskSpec& mask_u, const MaskSpec& mask_v) {
  const DistillConfig& dc = state.distill;
  BoundEncoder student_enc = bind_encoder(ctx, state.student_encoder, true, "student.encoder");
  BoundProjection student_head = bind_projection(ctx, state.student_head, true, "student.head");
  BoundEncoder teacher_enc = bind_encoder(ctx, state.teacher_encoder, false, "teacher.encoder");
  BoundProjection teacher_head = bind_projection(ctx, state.teacher_head, false, "teacher.head");

  // Student consumes the masked views; teacher the unmasked ones.
  Encoded s_u = encode(ctx, view_u, mask_u.mask, student_enc);
  Encoded s_v = encode(ctx, view_v, mask_v.mask, student_enc);
  Encoded t_u = encode(ctx, view_u, {}, teacher_enc);
  Encoded t_v = encode(ctx, view_v, {}, teacher_enc);

  // Cross-view class-token distillation.
  Value t_u_logits = head_logits(ctx, t_u.cls, teacher_head);
  Value t_v_logits = head_logits(ctx, t_v.cls, teacher_head);
  Value t_u_probs = project(ctx, t_u_logits, dc.teacher_temp, &state.center);
  Value t_v_probs = project(ctx, t_v_logits, dc.teacher_temp, &state.center);
  Value s_u_probs = project(ctx, head_logits(ctx, s_u.cls, student_head), dc.student_temp, nullptr);
  Value s_v_probs = project(ctx, head_logits(ctx, s_v.cls, student_head), dc.student_temp, nullptr);
  Value loss_cls = ctx.scale(ctx.add(ctx.cross_entropy_rows(t_v_probs, s_u_probs),
                                     ctx.cross_entropy_rows(t_u_probs, s_v_probs)),
                             0.5);

  // In-view masked-patch distillation, normalized per view by the masked
  // count (cross_entropy_rows averages over its rows).
  auto view_mim = [&](const Encoded& student, const Encoded& teacher,
                      const MaskSpec& mask) -> Value {
    const auto idx = mask.masked_indices();
    if (idx.empty()) return ctx.constant(0.0);
    Value s_rows = ctx.gather_rows(student.patches, idx);
    Value t_rows = ctx.gather_rows(teacher.patches, idx);
    Value s_probs = project(ctx, head_logits(ctx, s_rows, student_head), dc.student_temp, nullptr);
    Value t_probs =
        project(ctx, head_logits(ctx, t_rows, teacher_head), dc.teacher_temp, &state.center);
    return ctx.cross_entropy_rows(t_probs, s_probs);
  };
  Value loss_mim =
      ctx.scale(ctx.add(view_mim(s_u, t_u, mask_u), view_mim(s_v, t_v, mask_v)), 0.5);

  LossBuild out;
  out.cls = loss_cls;
  out.mim = loss_mim;
  out.total = ctx.add(loss_cls, loss_mim);
  out.mim_empty = mask_u.masked_count() == 0 && mask_v.masked_count() == 0;

  const Tensor& ul = ctx.value(t_u_logits);
  const Tensor& vl = ctx.value(t_v_logits);
  out.teacher_cls_logits = Tensor({2, ul.cols()});
  std::copy(ul.data(), ul.data() + ul.size(), out.teacher_cls_logits.data());
  std::copy(vl.data(), vl.data() + vl.size(), out.teacher_cls_logits.data() + ul.size());
  return out;
}

void ema_update_teacher(StudentTeacherState& state) {
  const double m = state.distill.ema_momentum;
  std::vector<Tensor*> student, teacher;
  state.visit_student([&](const std::string&, Tensor& t) { student.push_back(&t); });
  state.visit_teacher([&](const std::string&, Tensor& t) { teacher.push_back(&t); });
  for (std::size_t i = 0; i < student.size(); ++i) {
    Tensor& s = *student[i];
    Tensor& t = *teacher[i];
    for (std::size_t j = 0; j < s.size(); ++j) t[j] = m * t[j] + (1.0 - m) * s[j];
  }
}

void update_center(StudentTeacherState& state, const Tensor& batch_teacher_logits) {
  const double rho = state.distill.center_momentum;
  const std::size_t rows = batch_teacher_logits.rows();
  const std::size_t p = batch_teacher_logits.cols();
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows; ++i) mean += batch_teacher_logits.at(i, j);
    mean /= static_cast<double>(rows);
    state.center[j] = rho * state.center[j] + (1.0 - rho) * mean;
  }
}

double teacher_mean_entropy(const Tensor& batch_teacher_probs) {
  const std::size_t rows = batch_teacher_probs.rows();
  const std::size_t p = batch_teacher_probs.cols();
  double entropy = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows; ++i) mean += batch_teacher_probs.at(i, j);
    mean /= static_cast<double>(rows);
    if (mean > 0.0) entropy -= mean * std::log(mean);
  }
  return entropy;
}

double effective_lr(double lr_base, std::size_t batch_size) {
  return lr_base * static_cast<double>(batch_size) / 256.0;
}

}  // namespace sgt::ssl
