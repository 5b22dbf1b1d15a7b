#include "sgt/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "sgt/classifier.hpp"
#include "sgt/corrupt.hpp"
#include "sgt/distill.hpp"
#include "sgt/errors.hpp"
#include "sgt/metrics.hpp"
#include "sgt/patch_graph.hpp"
#include "sgt/relevancy.hpp"
#include "sgt/rng.hpp"
#include "sgt/synth.hpp"

namespace sgt::run {

namespace {

using num::GradientContext;
using num::Rng;
using num::Tensor;
using num::Value;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Each check returns an empty string on success, a reason otherwise.
using CheckFn = std::function<std::string()>;


// ---------------------------------------------------------------------------
// Naive-loop oracles, written independently of the library kernels.
// ---------------------------------------------------------------------------

Tensor loop_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

Tensor loop_normalize(const Tensor& a) {
  const std::size_t n = a.rows();
  Tensor out({n, n});
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a.at(i, j) + (i == j ? 1.0 : 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = (a.at(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(deg[i] * deg[j]);
  return out;
}

Tensor loop_attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* attn_out) {
  const std::size_t t = q.rows(), dk = q.cols(), dv = v.cols();
  Tensor attn({t, t});
  for (std::size_t i = 0; i < t; ++i) {
    std::vector<double> scores(t);
    double mx = -1e300;
    for (std::size_t j = 0; j < t; ++j) {
      double acc = 0.0;
      for (std::size_t d = 0; d < dk; ++d) acc += q.at(i, d) * k.at(j, d);
      scores[j] = acc / std::sqrt(static_cast<double>(dk));
      mx = std::max(mx, scores[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      attn.at(i, j) = std::exp(scores[j] - mx);
      sum += attn.at(i, j);
    }
    for (std::size_t j = 0; j < t; ++j) attn.at(i, j) /= sum;
  }
  if (attn_out) *attn_out = attn;
  Tensor out({t, dv});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t d = 0; d < dv; ++d) {
      double acc = 0.0;
      for (std::size_t j = 0; j < t; ++j) acc += attn.at(i, j) * v.at(j, d);
      out.at(i, d) = acc;
    }
  return out;
}

double loop_cut_loss(const Tensor& a, const Tensor& s) {
  const std::size_t n = a.rows(), c = s.cols();
  double num = 0.0, den = 0.0;
  for (std::size_t cc = 0; cc < c; ++cc)
    for (std::size_t i = 0; i < n; ++i) {
      double deg = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double atil = a.at(i, j) + (i == j ? 1.0 : 0.0);
        num += s.at(i, cc) * atil * s.at(j, cc);
        deg += atil;
      }
      den += s.at(i, cc) * deg * s.at(i, cc);
    }
  return -num / den;
}

double loop_ortho_loss(const Tensor& s) {
  const std::size_t n = s.rows(), c = s.cols();
  Tensor gram({c, c});
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += s.at(k, i) * s.at(k, j);
      gram.at(i, j) = acc;
    }
  double fro = 0.0;
  for (std::size_t i = 0; i < gram.size(); ++i) fro += gram[i] * gram[i];
  fro = std::sqrt(fro);
  double out = 0.0;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = gram.at(i, j) / fro -
                       (i == j ? 1.0 / std::sqrt(static_cast<double>(c)) : 0.0);
      out += d * d;
    }
  return std::sqrt(out);
}

// ---------------------------------------------------------------------------
// Shared toy fixtures.
// ---------------------------------------------------------------------------

ssl::EncoderConfig toy_encoder() {
  ssl::EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.depth = 2;
  cfg.mlp_dim = 16;
  return cfg;
}

ssl::DistillConfig toy_distill() {
  ssl::DistillConfig dc;
  dc.prototypes = 4;
  dc.proj_hidden = 8;
  return dc;
}

model::ClassifierConfig toy_classifier() {
  model::ClassifierConfig cfg;
  cfg.input_dim = 3;
  cfg.gcn_layers = 1;
  cfg.model_dim = 4;
  cfg.heads = 2;
  cfg.blocks = 1;
  cfg.mlp_dim = 6;
  cfg.clusters = 2;
  return cfg;
}

Tensor random_symmetric(std::size_t n, Rng& rng, double p = 0.5) {
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) a.at(i, j) = a.at(j, i) = 1.0;
  return a;
}

std::string check_fd_losses() {
  ssl::StudentTeacherState state = ssl::StudentTeacherState::init(toy_encoder(), toy_distill(), 5);
  Tensor u = data::gen_real_image(16, 1001);
  Tensor v = data::gen_real_image(16, 1002);
  ssl::MaskSpec mu = ssl::blockwise_mask(2, 0.5, 11);
  ssl::MaskSpec mv = ssl::blockwise_mask(2, 0.5, 12);

  // Every student tensor participates; sample a spread of them to keep the
  // runtime in budget while exercising all three objectives.
  const std::vector<std::string> probed = {
      "student.encoder.patch.weight", "student.encoder.cls",
      "student.encoder.mask_token",   "student.encoder.pos",
      "student.encoder.block.0.attn.wq.0", "student.encoder.block.1.mlp.w1",
      "student.encoder.final.gain",   "student.head.w1",
      "student.head.w3",              "student.head.b3"};
  num::NamedTensors params;
  state.visit_student([&](const std::string& name, Tensor& t) {
    if (std::find(probed.begin(), probed.end(), name) != probed.end()) params[name] = t;
  });

  ssl::StudentTeacherState fd_state = state;
  auto make_builder = [&](int which) {
    return [&, which](GradientContext& ctx, const num::NamedTensors& p) -> Value {
      fd_state = state;
      fd_state.visit_student([&](const std::string& name, Tensor& t) {
        auto it = p.find(name);
        if (it != p.end()) t = it->second;
      });
      ssl::LossBuild lb = ssl::build_loss(ctx, fd_state, u, v, mu, mv);
      return which == 0 ? lb.cls : (which == 1 ? lb.mim : lb.total);
    };
  };
  for (int which = 0; which < 3; ++which) {
    auto report = num::finite_diff_check(make_builder(which), params, 1e-5, 1e-6);
    if (!report.pass) {
      const char* names[] = {"loss_cls", "loss_mim", "total_loss"};
      std::ostringstream os;
      os << names[which] << " max rel err " << report.max_rel_err();
      return os.str();
    }
  }
  return "";
}

std::string check_fd_classifier() {
  Rng rng(7);
  model::ClassifierParams params = model::ClassifierParams::init(toy_classifier(), 7);
  Tensor f = random_tensor({3, 3}, rng);
  Tensor a({3, 3});
  a.at(0, 1) = a.at(1, 0) = 1.0;
  a.at(1, 2) = a.at(2, 1) = 1.0;
  graph::Graph g = graph::assemble_graph(f, a);

  num::NamedTensors probe;
  model::ClassifierParams copy = params;
  copy.visit("clf", [&](const std::string& name, Tensor& t) { probe[name] = t; });

  model::ClassifierParams fd_params = params;
  // Composition objective (plain logit functional) and the full training
  // loss, both against central differences.
  for (int which = 0; which < 2; ++which) {
    auto builder = [&](GradientContext& ctx, const num::NamedTensors& p) -> Value {
      fd_params = params;
      fd_params.visit("clf", [&](const std::string& name, Tensor& t) {
        auto it = p.find(name);
        if (it != p.end()) t = it->second;
      });
      model::BoundClassifier bound = model::bind_classifier(ctx, fd_params, true, "clf");
      model::ForwardResult fwd = model::classifier_forward(ctx, g, bound);
      if (which == 0) {
        return ctx.add(ctx.select_element(fwd.logits, 0, 1),
                       ctx.scale(ctx.select_element(fwd.logits, 0, 0), 0.5));
      }
      return model::classifier_loss(ctx, fwd.logits, 1, fwd.pool.cut_loss, fwd.pool.ortho_loss,
                                    1.0);
    };
    auto report = num::finite_diff_check(builder, probe, 1e-5, 1e-6);
    if (!report.pass) {
      std::ostringstream os;
      os << (which == 0 ? "composition" : "classifier_loss") << " max rel err "
         << report.max_rel_err();
      return os.str();
    }
  }
  return "";
}

std::string check_oracle_normalize() {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = random_symmetric(3 + rng.below(4), rng);
    Tensor mine = graph::normalize_adjacency(a);
    Tensor ref = loop_normalize(a);
    for (std::size_t i = 0; i < mine.size(); ++i)
      if (std::fabs(mine[i] - ref[i]) > 1e-12) return "mismatch vs dense formula";
  }
  return "";
}

std::string check_oracle_msa() {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 6, heads = 2, t = 3;
    model::AttentionParams attn = model::init_attention(dim, heads, rng);
    Tensor tokens = random_tensor({t, dim}, rng);

    GradientContext ctx;
    model::BoundAttention bound = model::bind_attention(ctx, attn, false, "attn");
    std::vector<Value> record;
    model::AttentionTap tap{&record, nullptr};
    Value out = model::msa(ctx, ctx.constant(tokens), bound, tap);

    Tensor concat({t, dim});
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor probs;
      Tensor head = loop_attention(loop_matmul(tokens, attn.wq[h]),
                                   loop_matmul(tokens, attn.wk[h]),
                                   loop_matmul(tokens, attn.wv[h]), &probs);
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < dim / heads; ++j)
          concat.at(i, h * (dim / heads) + j) = head.at(i, j);
      for (std::size_t i = 0; i < probs.size(); ++i)
        if (std::fabs(ctx.value(record[h])[i] - probs[i]) > 1e-12) return "attention mismatch";
    }
    Tensor expected = loop_matmul(concat, attn.wo);
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (std::fabs(ctx.value(out)[i] - expected[i]) > 1e-12) return "output mismatch";
  }
  return "";
}

std::string check_oracle_mincut() {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng.below(3);
    Tensor a = random_symmetric(n, rng);
    Tensor s = num::softmax_rows(random_tensor({n, 3}, rng, -2.0, 2.0));
    GradientContext ctx;
    model::PoolLosses losses = model::mincut_losses(ctx, ctx.constant(s), a);
    if (std::fabs(ctx.value(losses.cut)[0] - loop_cut_loss(a, s)) > 1e-12) return "cut mismatch";
    if (std::fabs(ctx.value(losses.ortho)[0] - loop_ortho_loss(s)) > 1e-12) {
      return "ortho mismatch";
    }
  }
  return "";
}

std::string check_oracle_chain() {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    rel::AttentionRecord rec;
    rec.tokens = 4;
    rec.heads = 2;
    for (int b = 0; b < 2; ++b) {
      Tensor a({2, 4, 4}), g({2, 4, 4});
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.uniform(0.0, 1.0);
        g[i] = rng.uniform(-1.0, 1.0);
      }
      rec.attention.push_back(std::move(a));
      rec.gradient.push_back(std::move(g));
    }
    Tensor mine = rel::chain_relevance(rec);
    Tensor ref = loop_matmul(rel::block_relevance(rec, 0), rel::block_relevance(rec, 1));
    for (std::size_t i = 0; i < mine.size(); ++i)
      if (std::fabs(mine[i] - ref[i]) > 1e-12) return "chain mismatch";
  }
  return "";
}

std::string check_permutation_invariance() {
  Rng rng(23);
  model::ClassifierConfig cfg;
  cfg.input_dim = 16;
  cfg.gcn_layers = 3;
  cfg.model_dim = 16;
  cfg.heads = 4;
  cfg.blocks = 3;
  cfg.mlp_dim = 32;
  cfg.clusters = 16;
  model::ClassifierParams params = model::ClassifierParams::init(cfg, 23);

  graph::PatchGrid grid = graph::make_grid(64, 64, 8);
  Tensor a = graph::build_knn_adjacency(grid, 8);
  Tensor f = random_tensor({64, 16}, rng);
  graph::Graph g = graph::assemble_graph(f, a);
  Tensor base = model::classify_logits(params, g);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 64; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Tensor pf({64, 16});
    Tensor pa({64, 64});
    for (std::size_t i = 0; i < 64; ++i) {
      for (std::size_t d = 0; d < 16; ++d) pf.at(i, d) = f.at(perm[i], d);
      for (std::size_t j = 0; j < 64; ++j) pa.at(i, j) = a.at(perm[i], perm[j]);
    }
    graph::Graph pg = graph::assemble_graph(pf, pa);
    if (!model::classify_logits(params, pg).same_bits(base)) {
      return "logits changed under permutation " + std::to_string(trial);
    }
  }
  return "";
}

std::string check_relevancy_identities() {
  Rng rng(29);
  model::ClassifierConfig cfg = toy_classifier();
  cfg.input_dim = 5;
  cfg.model_dim = 8;
  cfg.blocks = 2;
  cfg.clusters = 3;
  cfg.gcn_layers = 2;
  cfg.mlp_dim = 12;
  model::ClassifierParams params = model::ClassifierParams::init(cfg, 31);
  params.head_weight = Tensor::zeros(params.head_weight.shape());
  params.head_bias = Tensor::zeros(params.head_bias.shape());

  Tensor f = random_tensor({6, 5}, rng);
  Tensor a = random_symmetric(6, rng, 0.5);
  for (std::size_t i = 0; i + 1 < 6; ++i) a.at(i, i + 1) = a.at(i + 1, i) = 1.0;
  graph::Graph g = graph::assemble_graph(f, a);
  graph::PatchGrid grid = graph::make_grid(3, 2, 1);

  rel::AttentionRecord rec = rel::record_attention_gradients(params, g, 1);
  for (std::size_t b = 0; b < rec.attention.size(); ++b) {
    if (!rel::block_relevance(rec, b).same_bits(Tensor::identity(rec.tokens))) {
      return "block relevance != I under zero gradient";
    }
  }
  rel::Explanation ex = rel::explain(params, g, grid, 1);
  if (!ex.chained.same_bits(Tensor::identity(rec.tokens))) return "chained relevance != I";
  for (std::size_t i = 0; i < ex.heatmap.patch_values.size(); ++i)
    if (ex.heatmap.patch_values[i] != 0.5) return "heatmap not uniform 0.5";
  return "";
}

std::string check_softmax_and_matmul() {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({3, 6}, rng, -8.0, 8.0);
    Tensor p = num::softmax_rows(x);
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 6; ++j) sum += p.at(i, j);
      if (std::fabs(sum - 1.0) > 1e-12) return "softmax row sum off";
    }
    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({3, 5}, rng);
    Tensor c = random_tensor({5, 2}, rng);
    Tensor left = num::matmul(num::matmul(a, b), c);
    Tensor right = num::matmul(a, num::matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i)
      if (std::fabs(left[i] - right[i]) > 1e-9) return "matmul associativity off";
  }
  return "";
}

std::string check_adjacency_invariants() {
  for (std::size_t k : {1u, 4u, 8u}) {
    graph::PatchGrid grid = graph::make_grid(8, 8, 2);  // 16 nodes
    Tensor a = graph::build_knn_adjacency(grid, k);
    Tensor a2 = graph::build_knn_adjacency(grid, k);
    if (!a.same_bits(a2)) return "adjacency not deterministic";
    Tensor norm = graph::normalize_adjacency(a);
    if (!norm.same_bits(num::transpose(norm))) return "normalized adjacency not symmetric";
    for (std::size_t i = 0; i < grid.count(); ++i) {
      double deg = 0.0;
      for (std::size_t j = 0; j < grid.count(); ++j) deg += a.at(i, j);
      if (deg < 1.0) return "degree floor violated";
    }
  }
  return "";
}

std::string check_mask_coverage() {
  const double r = 0.4;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    ssl::MaskSpec spec = ssl::blockwise_mask(8, r, seed);
    const double coverage = static_cast<double>(spec.masked_count()) / 64.0;
    if (coverage < r || coverage > r + 0.4) return "coverage outside [r, r+0.4]";
  }
  return "";
}

std::string check_corruptions() {
  Tensor probe = data::gen_real_image(64, 424242);
  for (int k = 0; k < data::kCorruptionKinds; ++k) {
    const auto kind = static_cast<data::Corruption>(k);
    if (!data::corrupt(probe, kind, 0, 9).same_bits(probe)) return "level-0 not identity";
    double prev = 0.0;
    for (int level = 1; level <= data::kCorruptionLevels; ++level) {
      Tensor out = data::corrupt(probe, kind, level, 9);
      double mean_abs = 0.0;
      for (std::size_t i = 0; i < probe.size(); ++i) mean_abs += std::fabs(out[i] - probe[i]);
      mean_abs /= static_cast<double>(probe.size());
      if (mean_abs + 1e-15 < prev) {
        return std::string(data::corruption_name(kind)) + " severity not monotone";
      }
      prev = mean_abs;
    }
  }
  return "";
}

std::string check_auc() {
  if (data::auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) != 0.75) return "pair example off";
  if (data::auc({0.2, 0.2, 0.2, 0.2}, {0, 1, 0, 1}) != 0.5) return "tie handling off";
  Rng rng(37);
  std::vector<double> scores;
  std::vector<int> labels = {0, 1};
  scores.push_back(rng.uniform());
  scores.push_back(rng.uniform());
  for (int i = 0; i < 30; ++i) {
    scores.push_back(rng.uniform(-2.0, 2.0));
    labels.push_back(static_cast<int>(rng.bernoulli(0.5)));
  }
  const double base = data::auc(scores, labels);
  std::vector<double> warped = scores;
  for (double& s : warped) s = std::atan(2.0 * s) * 3.0 + 5.0;
  if (data::auc(warped, labels) != base) return "not invariant to monotone transform";
  return "";
}

std::string check_dataset() {
  data::GenConfig cfg{40, 64, 8, 77};
  auto a = data::gen_dataset(cfg);
  auto b = data::gen_dataset(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].image.same_bits(b[i].image)) return "dataset not deterministic";
    double coverage = 0.0;
    for (std::size_t j = 0; j < a[i].mask.size(); ++j) coverage += a[i].mask[j];
    if (a[i].label == 0 && coverage != 0.0) return "real sample has nonempty mask";
    if (a[i].label == 1) {
      coverage /= static_cast<double>(a[i].mask.size());
      if (coverage < 0.05 - 1.0 / 64.0 || coverage > 0.30 + 1.0 / 64.0) {
        return "fake mask coverage outside bounds";
      }
    }
  }
  return "";
}

std::string check_distill_mechanics() {
  ssl::StudentTeacherState state = ssl::StudentTeacherState::init(toy_encoder(), toy_distill(), 3);
  // Stop-gradient: only student parameters appear on the tape.
  Tensor u = data::gen_real_image(16, 2001);
  Tensor v = data::gen_real_image(16, 2002);
  ssl::MaskSpec mu = ssl::blockwise_mask(2, 0.5, 31);
  ssl::MaskSpec mv = ssl::blockwise_mask(2, 0.5, 32);
  GradientContext ctx;
  ssl::LossBuild lb = ssl::build_loss(ctx, state, u, v, mu, mv);
  ctx.backward(lb.total);
  for (const auto& name : ctx.param_names()) {
    if (name.rfind("student.", 0) != 0) return "teacher tensor tracked: " + name;
  }

  // EMA endpoints.
  ssl::StudentTeacherState ema = state;
  ema.student_encoder.cls_token[0] += 1.0;
  ema.distill.ema_momentum = 0.0;
  ssl::ema_update_teacher(ema);
  if (!ema.teacher_encoder.cls_token.same_bits(ema.student_encoder.cls_token)) {
    return "EMA m=0 is not a copy";
  }

  // Center mechanics with zero momentum.
  ssl::StudentTeacherState center = state;
  center.distill.center_momentum = 0.0;
  Tensor logits({2, center.distill.prototypes});
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = static_cast<double>(i);
  ssl::update_center(center, logits);
  for (std::size_t j = 0; j < center.distill.prototypes; ++j) {
    const double mean = 0.5 * (logits.at(0, j) + logits.at(1, j));
    if (center.center[j] != mean) return "center != batch mean at rho=0";
  }

  // Learning-rate rule.
  if (ssl::effective_lr(5e-4, 256) != 5e-4) return "lr rule at batch 256";
  if (std::fabs(ssl::effective_lr(5e-4, 64) - 1.25e-4) > 1e-18) return "lr rule at batch 64";
  return "";
}

}  // namespace

std::vector<CheckResult> run_selftest() {
  const std::vector<std::pair<std::string, CheckFn>> checks = {
      {"finite-diff: distillation losses", check_fd_losses},
      {"finite-diff: classifier composition and loss", check_fd_classifier},
      {"oracle: normalized adjacency", check_oracle_normalize},
      {"oracle: multi-head self-attention", check_oracle_msa},
      {"oracle: min-cut losses", check_oracle_mincut},
      {"oracle: relevance chain", check_oracle_chain},
      {"permutation invariance (N=64, bit-exact)", check_permutation_invariance},
      {"relevancy identities (zero gradient)", check_relevancy_identities},
      {"softmax rows and matmul associativity", check_softmax_and_matmul},
      {"knn adjacency invariants", check_adjacency_invariants},
      {"blockwise mask coverage", check_mask_coverage},
      {"corruption identity and monotonicity", check_corruptions},
      {"auc rank statistic", check_auc},
      {"synthetic dataset invariants", check_dataset},
      {"distillation mechanics", check_distill_mechanics},
  };

  std::vector<CheckResult> results;
  for (const auto& [name, fn] : checks) {
    CheckResult r;
    r.name = name;
    try {
      r.detail = fn();
      r.pass = r.detail.empty();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace sgt::run
