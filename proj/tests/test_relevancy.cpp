#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sgt/netpbm.hpp"
#include "sgt/relevancy.hpp"
#include "sgt/rng.hpp"

using namespace sgt;
using namespace sgt::rel;
using sgt::num::GradientContext;
using sgt::num::Rng;
using sgt::num::Tensor;
using sgt::num::Value;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

model::ClassifierConfig small_config() {
  model::ClassifierConfig cfg;
  cfg.input_dim = 5;
  cfg.gcn_layers = 2;
  cfg.model_dim = 8;
  cfg.heads = 2;
  cfg.blocks = 2;
  cfg.mlp_dim = 12;
  cfg.clusters = 3;
  return cfg;
}

graph::Graph small_graph(Rng& rng) {
  Tensor f = random_tensor({6, 5}, rng);
  Tensor a({6, 6});
  for (std::size_t i = 0; i + 1 < 6; ++i) a.at(i, i + 1) = a.at(i + 1, i) = 1.0;
  a.at(0, 5) = a.at(5, 0) = 1.0;
  return graph::assemble_graph(f, a);
}

AttentionRecord synthetic_record(std::size_t blocks, std::size_t heads, std::size_t tokens,
                                 Rng& rng) {
  AttentionRecord rec;
  rec.tokens = tokens;
  rec.heads = heads;
  for (std::size_t b = 0; b < blocks; ++b) {
    Tensor a({heads, tokens, tokens});
    Tensor g({heads, tokens, tokens});
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor probs = num::softmax_rows(random_tensor({tokens, tokens}, rng));
      std::copy(probs.data(), probs.data() + probs.size(), a.data() + h * tokens * tokens);
    }
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
    rec.attention.push_back(std::move(a));
    rec.gradient.push_back(std::move(g));
  }
  return rec;
}

}  // namespace

TEST_CASE("record shapes and class validation") {
  Rng rng(3);
  model::ClassifierParams params = model::ClassifierParams::init(small_config(), 1);
  graph::Graph g = small_graph(rng);

  AttentionRecord rec = record_attention_gradients(params, g, 1);
  CHECK(rec.tokens == 4);
  CHECK(rec.heads == 2);
  REQUIRE(rec.attention.size() == 2);
  for (std::size_t b = 0; b < 2; ++b) {
    CHECK(rec.attention[b].shape() == std::vector<std::size_t>{2, 4, 4});
    CHECK(rec.gradient[b].shape() == std::vector<std::size_t>{2, 4, 4});
    CHECK(rec.gradient[b].all_finite());
  }
  CHECK(rec.assignment.rows() == 6);
  CHECK(rec.assignment.cols() == 3);

  CHECK_THROWS_AS(record_attention_gradients(params, g, 2), ConfigError);
  CHECK_THROWS_AS(record_attention_gradients(params, g, -1), ConfigError);
}

TEST_CASE("gradients differ between target classes") {
  Rng rng(5);
  model::ClassifierParams params = model::ClassifierParams::init(small_config(), 2);
  graph::Graph g = small_graph(rng);
  AttentionRecord r0 = record_attention_gradients(params, g, 0);
  AttentionRecord r1 = record_attention_gradients(params, g, 1);
  CHECK(r0.attention[0].same_bits(r1.attention[0]));  // same forward
  CHECK_FALSE(r0.gradient[0].same_bits(r1.gradient[0]));
}

TEST_CASE("recorded attention gradients match finite differences via re-injection") {
  Rng rng(7);
  model::ClassifierParams params = model::ClassifierParams::init(small_config(), 3);
  graph::Graph g = small_graph(rng);
  const int target = 1;
  AttentionRecord rec = record_attention_gradients(params, g, target);
  const std::size_t t = rec.tokens;

  // One block at a time: re-inject that block's recorded attention as leaf
  // parameters and leave the other blocks computed naturally, so the leaf
  // gradient coincides with the recorded interior gradient.
  for (std::size_t probe_block = 0; probe_block < rec.attention.size(); ++probe_block) {
    num::NamedTensors leaves;
    for (std::size_t h = 0; h < rec.heads; ++h) {
      Tensor a({t, t});
      std::copy(rec.attention[probe_block].data() + h * t * t,
                rec.attention[probe_block].data() + (h + 1) * t * t, a.data());
      leaves["attn." + std::to_string(h)] = a;
    }

    auto builder = [&](GradientContext& ctx, const num::NamedTensors& p) -> Value {
      model::BoundClassifier bound = model::bind_classifier(ctx, params, false, "clf");
      model::AttentionOverride over;
      over.probs.resize(rec.attention.size());
      for (std::size_t h = 0; h < rec.heads; ++h) {
        over.probs[probe_block].push_back(
            ctx.param("attn." + std::to_string(h), p.at("attn." + std::to_string(h))));
      }
      model::ForwardResult fwd = model::classifier_forward(ctx, g, bound, &over);
      return ctx.select_element(fwd.logits, 0, target);
    };

    auto report = num::finite_diff_check(builder, leaves, 1e-5, 1e-5);
    CHECK(report.pass);

    GradientContext ctx;
    num::NamedTensors unused;
    Value obj = builder(ctx, leaves);
    ctx.backward(obj);
    (void)unused;
    for (std::size_t h = 0; h < rec.heads; ++h) {
      Tensor leaf_grad = ctx.grad_of("attn." + std::to_string(h));
      for (std::size_t i = 0; i < t * t; ++i) {
        CHECK(std::fabs(leaf_grad[i] - rec.gradient[probe_block][h * t * t + i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("block relevance: zero gradient collapses to the identity") {
  Rng rng(11);
  AttentionRecord rec = synthetic_record(2, 2, 4, rng);
  for (auto& g : rec.gradient) g = Tensor::zeros(g.shape());
  for (std::size_t b = 0; b < 2; ++b) {
    CHECK(block_relevance(rec, b).same_bits(Tensor::identity(4)));
  }
}

TEST_CASE("block relevance: single head collapse and two-head cancellation") {
  Rng rng(13);
  AttentionRecord one = synthetic_record(1, 1, 3, rng);
  Tensor expected({3, 3});
  for (std::size_t i = 0; i < 9; ++i)
    expected[i] = one.gradient[0][i] * one.attention[0][i];
  for (std::size_t i = 0; i < 3; ++i) expected.at(i, i) += 1.0;
  CHECK(block_relevance(one, 0).same_bits(expected));

  // Two heads sharing A with gradients g and −g average to zero.
  AttentionRecord two = synthetic_record(1, 2, 3, rng);
  const std::size_t tt = 9;
  for (std::size_t i = 0; i < tt; ++i) {
    two.attention[0][tt + i] = two.attention[0][i];
    two.gradient[0][tt + i] = -two.gradient[0][i];
  }
  CHECK(block_relevance(two, 0).same_bits(Tensor::identity(3)));
}

TEST_CASE("chain relevance: identities, single block, oracle product") {
  Rng rng(17);
  AttentionRecord rec = synthetic_record(3, 2, 4, rng);
  for (auto& g : rec.gradient) g = Tensor::zeros(g.shape());
  CHECK(chain_relevance(rec).same_bits(Tensor::identity(4)));

  AttentionRecord single = synthetic_record(1, 2, 4, rng);
  CHECK(chain_relevance(single).same_bits(block_relevance(single, 0)));

  for (int trial = 0; trial < 100; ++trial) {
    AttentionRecord two = synthetic_record(2, 2, 4, rng);
    Tensor mine = chain_relevance(two);
    Tensor ref = oracle::chain_product({block_relevance(two, 0), block_relevance(two, 1)});
    for (std::size_t i = 0; i < mine.size(); ++i) CHECK(std::fabs(mine[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("chain relevance is associative") {
  Rng rng(19);
  AttentionRecord rec = synthetic_record(3, 2, 4, rng);
  Tensor a = block_relevance(rec, 0), b = block_relevance(rec, 1), c = block_relevance(rec, 2);
  Tensor left = num::matmul(num::matmul(a, b), c);
  Tensor right = num::matmul(a, num::matmul(b, c));
  for (std::size_t i = 0; i < left.size(); ++i) CHECK(std::fabs(left[i] - right[i]) <= 1e-12);
}

TEST_CASE("reverse pool: inheritance, uniform mean, mass, linearity") {
  Tensor onehot = Tensor::from_rows({{1, 0}, {0, 1}, {0, 1}});
  Tensor rel = Tensor::vec({2.0, -3.0});
  Tensor nodes = reverse_pool(rel, onehot);
  CHECK(nodes[0] == 2.0);
  CHECK(nodes[1] == -3.0);
  CHECK(nodes[2] == -3.0);

  // Disjoint one-hot columns conserve total mass.
  Tensor strict = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor mass = reverse_pool(rel, strict);
  CHECK(mass[0] + mass[1] == rel[0] + rel[1]);

  Tensor uniform = Tensor::full({3, 2}, 0.5);
  Tensor mean = reverse_pool(rel, uniform);
  for (std::size_t i = 0; i < 3; ++i) CHECK(mean[i] == 0.5 * (2.0 - 3.0));

  // Exact linearity on dyadic instances (all products and sums exact in f64).
  Tensor s = Tensor::from_rows({{0.5, 0.25, 0.25}, {0.25, 0.5, 0.25}, {0, 0.5, 0.5}, {1, 0, 0}});
  Tensor x = Tensor::vec({0.5, -1.0, 2.0});
  Tensor y = Tensor::vec({1.5, 0.25, -0.75});
  Tensor xy({3});
  for (std::size_t i = 0; i < 3; ++i) xy[i] = x[i] + y[i];
  Tensor lhs = reverse_pool(xy, s);
  Tensor rx = reverse_pool(x, s), ry = reverse_pool(y, s);
  for (std::size_t i = 0; i < 4; ++i) CHECK(lhs[i] == rx[i] + ry[i]);

  // Near-exact on arbitrary stochastic assignments.
  Rng rng(23);
  Tensor sr = num::softmax_rows(random_tensor({4, 3}, rng));
  Tensor lr = reverse_pool(xy, sr);
  Tensor rxr = reverse_pool(x, sr), ryr = reverse_pool(y, sr);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(lr[i] - (rxr[i] + ryr[i])) <= 1e-12);

  CHECK_THROWS_AS(reverse_pool(Tensor::vec({1.0, 2.0, 3.0}), strict), ShapeError);
}

TEST_CASE("rasterize: constant input maps to 0.5, extremes to 0 and 1") {
  graph::PatchGrid grid = graph::make_grid(4, 4, 2);
  Heatmap flat = rasterize_heatmap(Tensor::full({4}, 3.3), grid);
  for (std::size_t i = 0; i < 4; ++i) CHECK(flat.patch_values[i] == 0.5);

  Heatmap spread = rasterize_heatmap(Tensor::vec({0.0, 1.0, 5.0, 2.0}), grid);
  CHECK(spread.patch_values[0] == 0.0);
  CHECK(spread.patch_values[2] == 1.0);
  CHECK(spread.patch_values[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("heatmap CSV and PGM round trip at 8-bit tolerance") {
  Rng rng(29);
  graph::PatchGrid grid = graph::make_grid(8, 8, 2);
  Heatmap map = rasterize_heatmap(random_tensor({16}, rng, -2.0, 5.0), grid);

  const auto dir = std::filesystem::temp_directory_path() / "sgt_heatmap_test";
  std::filesystem::create_directories(dir);
  data::save_pgm(dir / "patch.pgm", map.patch_values);
  Tensor back = data::load_pgm(dir / "patch.pgm");
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(std::fabs(back[i] - map.patch_values[i]) <= 1.0 / 255.0);

  write_heatmap_csv(dir / "rel.csv", map, grid);
  std::ifstream is(dir / "rel.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "row,col,value");
  std::size_t rows = 0;
  double r, c, v;
  char comma;
  while (is >> r >> comma >> c >> comma >> v) {
    CHECK(v == map.node_values[static_cast<std::size_t>(r) * 4 + static_cast<std::size_t>(c)]);
    ++rows;
  }
  CHECK(rows == 16);
  std::filesystem::remove_all(dir);
}

TEST_CASE("zero-gradient model yields identity chain and uniform heatmap") {
  Rng rng(31);
  model::ClassifierParams params = model::ClassifierParams::init(small_config(), 5);
  params.head_weight = Tensor::zeros(params.head_weight.shape());
  params.head_bias = Tensor::zeros(params.head_bias.shape());
  graph::Graph g = small_graph(rng);
  graph::PatchGrid grid = graph::make_grid(3, 2, 1);  // 6 nodes

  Explanation ex = explain(params, g, grid, 1);
  CHECK(ex.chained.same_bits(Tensor::identity(4)));
  for (std::size_t i = 0; i < 6; ++i) CHECK(ex.heatmap.patch_values[i] == 0.5);
  CHECK(ex.probability_fake == 0.5);
}

TEST_CASE("upsample replicates patches to pixel resolution") {
  graph::PatchGrid grid = graph::make_grid(4, 4, 2);
  Heatmap map = rasterize_heatmap(Tensor::vec({0.0, 1.0, 2.0, 3.0}), grid);
  Tensor up = upsample_heatmap(map, grid);
  CHECK(up.shape() == std::vector<std::size_t>{4, 4});
  CHECK(up[0] == map.patch_values[0]);
  CHECK(up[1] == map.patch_values[0]);
  CHECK(up[2] == map.patch_values[1]);
  CHECK(up[4 + 0] == map.patch_values[0]);
  CHECK(up[2 * 4 + 2] == map.patch_values[3]);
}
