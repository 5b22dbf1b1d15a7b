#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "sgt/distill.hpp"
#include "sgt/pretrain.hpp"
#include "sgt/synth.hpp"

using namespace sgt;
using namespace sgt::ssl;
using sgt::num::GradientContext;
using sgt::num::Rng;
using sgt::num::Tensor;
using sgt::num::Value;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;  // 2x2 token grid
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.depth = 2;
  cfg.mlp_dim = 16;
  return cfg;
}

DistillConfig tiny_distill() {
  DistillConfig dc;
  dc.prototypes = 4;
  dc.proj_hidden = 8;
  return dc;
}

Tensor test_image(std::size_t size, std::uint64_t seed) {
  return data::gen_real_image(size, seed);
}

}  // namespace

TEST_CASE("augment_pair is deterministic and stays in range") {
  AugmentConfig cfg;
  Tensor img = test_image(16, 7);
  auto [u1, v1] = augment_pair(img, cfg, 99);
  auto [u2, v2] = augment_pair(img, cfg, 99);
  CHECK(u1.same_bits(u2));
  CHECK(v1.same_bits(v2));
  CHECK_FALSE(u1.same_bits(v1));  // independent draws

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto [u, v] = augment_pair(img, cfg, seed);
    for (std::size_t i = 0; i < u.size(); ++i) {
      CHECK(u[i] >= 0.0);
      CHECK(u[i] <= 1.0);
      CHECK(v[i] >= 0.0);
      CHECK(v[i] <= 1.0);
    }
  }
}

TEST_CASE("degenerate augmentation config is the identity") {
  AugmentConfig cfg;
  cfg.crop_min = cfg.crop_max = 1.0;
  cfg.flip_prob = 0.0;
  cfg.brightness_min = cfg.brightness_max = 1.0;
  Tensor img = test_image(16, 3);
  auto [u, v] = augment_pair(img, cfg, 5);
  CHECK(u.same_bits(img));
  CHECK(v.same_bits(img));
}

TEST_CASE("blockwise mask: vanishing ratio marks exactly one minimal block") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MaskSpec spec = blockwise_mask(8, 1e-9, seed);
    CHECK(spec.blocks.size() == 1);
    CHECK(spec.masked_count() == 4);  // the 2x2 rectangle is the only legal 4-token block
    CHECK(spec.blocks[0].height == 2);
    CHECK(spec.blocks[0].width == 2);
  }
}

TEST_CASE("blockwise mask coverage bound over many seeds") {
  const double r = 0.4;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    MaskSpec spec = blockwise_mask(8, r, seed);
    const double coverage = static_cast<double>(spec.masked_count()) / 64.0;
    CHECK(coverage >= r);
    CHECK(coverage <= r + 0.4);  // b_max = 0.4·N
  }
}

TEST_CASE("masked set is the union of the sampled rectangles") {
  MaskSpec spec = blockwise_mask(8, 0.4, 12345);
  std::vector<std::uint8_t> rebuilt(64, 0);
  for (const auto& b : spec.blocks) {
    CHECK(b.height * b.width >= 4);
    CHECK(b.height * b.width <= 25);
    CHECK(3 * b.height >= b.width);
    CHECK(3 * b.width >= b.height);
    for (std::size_t r = b.row; r < b.row + b.height; ++r)
      for (std::size_t c = b.col; c < b.col + b.width; ++c) rebuilt[r * 8 + c] = 1;
  }
  CHECK(rebuilt == spec.mask);
}

TEST_CASE("blockwise mask rejects ratios outside (0,1)") {
  CHECK_THROWS_AS(blockwise_mask(8, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(blockwise_mask(8, 1.0, 1), ConfigError);
}

TEST_CASE("encode: no mask means no substitution; shapes hold") {
  EncoderConfig cfg = tiny_encoder();
  EncoderParams params = EncoderParams::init(cfg, 11);
  Tensor img = test_image(16, 9);

  GradientContext ctx;
  BoundEncoder enc = bind_encoder(ctx, params, false, "enc");
  Encoded plain = encode(ctx, img, {}, enc);
  Encoded zero_mask = encode(ctx, img, std::vector<std::uint8_t>(4, 0), enc);
  CHECK(ctx.value(plain.cls).same_bits(ctx.value(zero_mask.cls)));
  CHECK(ctx.value(plain.patches).same_bits(ctx.value(zero_mask.patches)));
  CHECK(ctx.value(plain.cls).rows() == 1);
  CHECK(ctx.value(plain.cls).cols() == 8);
  CHECK(ctx.value(plain.patches).rows() == 4);
  CHECK(ctx.value(plain.patches).cols() == 8);
}

TEST_CASE("encode: fully masked input sees only mask token plus positions") {
  EncoderConfig cfg = tiny_encoder();
  cfg.depth = 0;  // inspect the pre-block token stream via a blockless encoder
  EncoderParams params = EncoderParams::init(cfg, 13);
  Tensor img = test_image(16, 21);

  GradientContext ctx;
  BoundEncoder enc = bind_encoder(ctx, params, false, "enc");
  Encoded out = encode(ctx, img, std::vector<std::uint8_t>(4, 1), enc);

  // Expected: LN(mask_token + pos_row) for every patch row, image-independent.
  Tensor other = test_image(16, 22);
  GradientContext ctx2;
  BoundEncoder enc2 = bind_encoder(ctx2, params, false, "enc");
  Encoded out2 = encode(ctx2, other, std::vector<std::uint8_t>(4, 1), enc2);
  CHECK(ctx.value(out.patches).same_bits(ctx2.value(out2.patches)));
}

TEST_CASE("project: uniform at zero logits, sharper at lower temperature, centered cancellation") {
  GradientContext ctx;
  Value zero_logits = ctx.constant(Tensor({1, 4}));
  Tensor uniform = ctx.value(project(ctx, zero_logits, 0.1, nullptr));
  for (std::size_t i = 0; i < 4; ++i) CHECK(uniform[i] == doctest::Approx(0.25).epsilon(1e-12));

  Tensor logits = Tensor::row({1.0, 0.2, -0.5, 0.0});
  Value lv = ctx.constant(logits);
  Tensor warm = ctx.value(project(ctx, lv, 1.0, nullptr));
  Tensor sharp = ctx.value(project(ctx, lv, 0.1, nullptr));
  const double warm_max = *std::max_element(warm.data(), warm.data() + 4);
  const double sharp_max = *std::max_element(sharp.data(), sharp.data() + 4);
  CHECK(sharp_max > warm_max);

  Tensor center = Tensor::vec({1.0, 0.2, -0.5, 0.0});
  Tensor cancelled = ctx.value(project(ctx, lv, 0.04, &center));
  for (std::size_t i = 0; i < 4; ++i) CHECK(cancelled[i] == doctest::Approx(0.25).epsilon(1e-12));
}

namespace {

StudentTeacherState make_tiny_state(std::uint64_t seed) {
  return StudentTeacherState::init(tiny_encoder(), tiny_distill(), seed);
}

struct LossOnViews {
  double cls, mim, total;
  bool mim_empty;
};

LossOnViews eval_loss(const StudentTeacherState& state, const Tensor& u, const Tensor& v,
                      const MaskSpec& mu, const MaskSpec& mv) {
  GradientContext ctx;
  LossBuild lb = build_loss(ctx, state, u, v, mu, mv);
  return {ctx.value(lb.cls)[0], ctx.value(lb.mim)[0], ctx.value(lb.total)[0], lb.mim_empty};
}

MaskSpec empty_mask(std::size_t n) {
  MaskSpec m;
  m.mask.assign(n, 0);
  m.ratio = 0.0;
  return m;
}

}  // namespace

TEST_CASE("loss_cls equals ln P when every distribution is uniform") {
  // Zero head outputs force uniform categorical outputs for both networks.
  StudentTeacherState state = make_tiny_state(17);
  state.student_head.w3 = Tensor::zeros(state.student_head.w3.shape());
  state.student_head.b3 = Tensor::zeros(state.student_head.b3.shape());
  state.teacher_head = state.student_head;
  state.center = Tensor::zeros(state.center.shape());

  Tensor u = test_image(16, 31), v = test_image(16, 32);
  MaskSpec mu = blockwise_mask(2, 0.5, 1), mv = blockwise_mask(2, 0.5, 2);
  auto loss = eval_loss(state, u, v, mu, mv);
  CHECK(loss.cls == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(loss.mim == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(loss.total == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("loss is symmetric under view exchange") {
  StudentTeacherState state = make_tiny_state(19);
  Tensor u = test_image(16, 41), v = test_image(16, 42);
  MaskSpec mu = blockwise_mask(2, 0.5, 3), mv = blockwise_mask(2, 0.5, 4);
  auto a = eval_loss(state, u, v, mu, mv);
  auto b = eval_loss(state, v, u, mv, mu);
  CHECK(a.cls == doctest::Approx(b.cls).epsilon(1e-12));
  CHECK(a.mim == doctest::Approx(b.mim).epsilon(1e-12));
}

TEST_CASE("near-one-hot matching distributions give near-zero loss") {
  StudentTeacherState state = make_tiny_state(23);
  // A large shared output bias pins both networks to prototype 0.
  state.student_head.w3 = Tensor::zeros(state.student_head.w3.shape());
  state.student_head.b3 = Tensor::zeros(state.student_head.b3.shape());
  state.student_head.b3[0] = 50.0;
  state.teacher_head = state.student_head;
  state.center = Tensor::zeros(state.center.shape());

  Tensor u = test_image(16, 51), v = test_image(16, 52);
  MaskSpec mu = blockwise_mask(2, 0.5, 5), mv = blockwise_mask(2, 0.5, 6);
  auto loss = eval_loss(state, u, v, mu, mv);
  CHECK(loss.cls < 1e-6);
  CHECK(loss.mim < 1e-6);
}

TEST_CASE("all-zero masks give zero MIM loss with the empty flag set") {
  StudentTeacherState state = make_tiny_state(29);
  Tensor u = test_image(16, 61), v = test_image(16, 62);
  auto loss = eval_loss(state, u, v, empty_mask(4), empty_mask(4));
  CHECK(loss.mim == 0.0);
  CHECK(loss.mim_empty);
  CHECK(loss.total == doctest::Approx(loss.cls).epsilon(1e-15));
}

TEST_CASE("normalized MIM loss is invariant to the masked count") {
  // With uniform outputs each masked position contributes exactly ln P, so
  // the per-view normalization keeps the loss at ln P for any mask size.
  StudentTeacherState state = make_tiny_state(31);
  state.student_head.w3 = Tensor::zeros(state.student_head.w3.shape());
  state.student_head.b3 = Tensor::zeros(state.student_head.b3.shape());
  state.teacher_head = state.student_head;
  state.center = Tensor::zeros(state.center.shape());

  Tensor u = test_image(16, 71), v = test_image(16, 72);
  MaskSpec one = empty_mask(4);
  one.mask[2] = 1;
  MaskSpec two = empty_mask(4);
  two.mask[0] = two.mask[3] = 1;
  auto a = eval_loss(state, u, v, one, one);
  auto b = eval_loss(state, u, v, two, two);
  CHECK(a.mim == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  CHECK(b.mim == doctest::Approx(a.mim).epsilon(1e-9));
}

TEST_CASE("teacher path is never tracked by the tape") {
  StudentTeacherState state = make_tiny_state(37);
  Tensor u = test_image(16, 81), v = test_image(16, 82);
  MaskSpec mu = blockwise_mask(2, 0.5, 7), mv = blockwise_mask(2, 0.5, 8);
  GradientContext ctx;
  LossBuild lb = build_loss(ctx, state, u, v, mu, mv);
  ctx.backward(lb.total);
  for (const auto& name : ctx.param_names()) {
    CHECK(name.rfind("student.", 0) == 0);
  }
}

TEST_CASE("with a blockless encoder the MIM loss ignores unmasked-patch edits") {
  EncoderConfig cfg = tiny_encoder();
  cfg.depth = 0;  // projection-only: no attention mixing
  StudentTeacherState state = StudentTeacherState::init(cfg, tiny_distill(), 41);

  Tensor u = test_image(16, 91), v = test_image(16, 92);
  MaskSpec mu = empty_mask(4);
  mu.mask[0] = 1;
  MaskSpec mv = empty_mask(4);
  mv.mask[1] = 1;

  auto base = eval_loss(state, u, v, mu, mv);

  // Perturb a pixel inside unmasked patch 3 of view u (bottom-right patch).
  Tensor u2 = u;
  u2[(12 * 16 + 12) * 3] = std::min(1.0, u2[(12 * 16 + 12) * 3] + 0.25);
  auto bumped = eval_loss(state, u2, v, mu, mv);
  CHECK(bumped.mim == base.mim);  // exactly invariant

  // Perturbing the masked patch's teacher input does change the loss.
  Tensor u3 = u;
  u3[(2 * 16 + 2) * 3] = std::min(1.0, u3[(2 * 16 + 2) * 3] + 0.25);
  auto moved = eval_loss(state, u3, v, mu, mv);
  CHECK(moved.mim != base.mim);
}

TEST_CASE("ema update momentum algebra") {
  StudentTeacherState state = make_tiny_state(43);
  // Make teacher and student differ.
  state.student_encoder.cls_token[0] = 1.0;
  state.teacher_encoder.cls_token[0] = -1.0;

  StudentTeacherState frozen = state;
  frozen.distill.ema_momentum = 1.0;
  ema_update_teacher(frozen);
  CHECK(frozen.teacher_encoder.cls_token.same_bits(state.teacher_encoder.cls_token));

  StudentTeacherState copy = state;
  copy.distill.ema_momentum = 0.0;
  ema_update_teacher(copy);
  CHECK(copy.teacher_encoder.cls_token.same_bits(copy.student_encoder.cls_token));

  // Two momentum-m steps against constant θ equal one step with momentum m².
  const double m = 0.7;
  StudentTeacherState twice = state;
  twice.distill.ema_momentum = m;
  ema_update_teacher(twice);
  ema_update_teacher(twice);
  StudentTeacherState once = state;
  once.distill.ema_momentum = m * m;
  ema_update_teacher(once);
  for (std::size_t i = 0; i < once.teacher_encoder.cls_token.size(); ++i) {
    CHECK(twice.teacher_encoder.cls_token[i] ==
          doctest::Approx(once.teacher_encoder.cls_token[i]).epsilon(1e-12));
  }
}

TEST_CASE("center update with zero momentum equals the batch mean") {
  StudentTeacherState state = make_tiny_state(47);
  state.distill.center_momentum = 0.0;
  Tensor logits = Tensor::from_rows({{1, 2, 3, 4}, {3, 4, 5, 6}});
  update_center(state, logits);
  CHECK(state.center[0] == 2.0);
  CHECK(state.center[1] == 3.0);
  CHECK(state.center[2] == 4.0);
  CHECK(state.center[3] == 5.0);
}

TEST_CASE("learning rate scaling rule") {
  CHECK(effective_lr(5e-4, 256) == doctest::Approx(5e-4).epsilon(1e-15));
  CHECK(effective_lr(5e-4, 64) == doctest::Approx(1.25e-4).epsilon(1e-15));
}

TEST_CASE("total loss gradient matches finite differences on a small encoder") {
  EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.depth = 2;
  cfg.mlp_dim = 8;
  DistillConfig dc = tiny_distill();
  StudentTeacherState state = StudentTeacherState::init(cfg, dc, 53);

  Tensor u = test_image(16, 101), v = test_image(16, 102);
  MaskSpec mu = blockwise_mask(2, 0.5, 9), mv = blockwise_mask(2, 0.5, 10);

  // Check a representative subset of student parameters (full FD over every
  // tensor is covered by the acceptance suite). build_loss binds the state's
  // tensors under their canonical names, which is exactly what the checker
  // reads back.
  num::NamedTensors params;
  StudentTeacherState probe = state;
  probe.visit_student([&](const std::string& name, Tensor& t) {
    if (name == "student.encoder.cls" || name == "student.encoder.mask_token" ||
        name == "student.head.w3" || name == "student.encoder.block.0.attn.wq.0" ||
        name == "student.encoder.block.1.mlp.w2" || name == "student.encoder.final.gain") {
      params[name] = t;
    }
  });

  StudentTeacherState fd_state = state;
  auto builder = [&](GradientContext& ctx, const num::NamedTensors& p) -> Value {
    fd_state = state;
    fd_state.visit_student([&](const std::string& name, Tensor& t) {
      auto it = p.find(name);
      if (it != p.end()) t = it->second;
    });
    return build_loss(ctx, fd_state, u, v, mu, mv).total;
  };
  auto report = num::finite_diff_check(builder, params, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("pretrain smoke: loss trace lands in the entropy range and checkpoints round trip") {
  data::GenConfig gen{8, 16, 8, 3};
  auto samples = data::gen_dataset(gen);

  PretrainConfig cfg;
  cfg.encoder = tiny_encoder();
  cfg.distill = tiny_distill();
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.lr_multiplier = 10.0;
  cfg.seed = 7;
  auto result = pretrain(samples, cfg);
  REQUIRE(result.trace.size() == 2);
  const double p = static_cast<double>(cfg.distill.prototypes);
  CHECK(result.trace[0].total > 0.0);
  CHECK(result.trace[0].total < 2.0 * std::log(p) + 1.0);

  const auto dir = std::filesystem::temp_directory_path() / "sgt_ckpt_test";
  std::filesystem::create_directories(dir);
  save_encoder_checkpoint(dir / "encoder", result.state.student_encoder);
  EncoderParams loaded = load_encoder_checkpoint(dir / "encoder");
  Tensor img = test_image(16, 111);
  CHECK(extract_cls_feature(loaded, img)
            .same_bits(extract_cls_feature(result.state.student_encoder, img)));
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_loss gradients flow through the student only once per param") {
  // Guard against double-binding: build_loss must not throw on duplicate
  // parameter names and must produce finite gradients.
  StudentTeacherState state = make_tiny_state(59);
  Tensor u = test_image(16, 121), v = test_image(16, 122);
  MaskSpec mu = blockwise_mask(2, 0.4, 11), mv = blockwise_mask(2, 0.4, 12);
  GradientContext ctx;
  LossBuild lb = build_loss(ctx, state, u, v, mu, mv);
  ctx.backward(lb.total);
  state.visit_student([&](const std::string& name, Tensor&) {
    CHECK(ctx.grad_of(name).all_finite());
  });
}
