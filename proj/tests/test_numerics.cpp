#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sgt/grad.hpp"
#include "sgt/rng.hpp"
#include "sgt/tensor.hpp"
#include "sgt/tensor_io.hpp"

using namespace sgt;
using namespace sgt::num;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("matmul identity and annihilating products") {
  Tensor m = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(Tensor::identity(2), m).same_bits(m));

  Tensor a = Tensor::from_rows({{1, 0}, {0, 0}});
  Tensor b = Tensor::from_rows({{0, 0}, {0, 1}});
  Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == 0.0);
}

TEST_CASE("matmul matches the triple-loop oracle exactly") {
  Rng rng(101);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  CHECK(matmul(a, b).same_bits(oracle::matmul(a, b)));
}

TEST_CASE("matmul dimension mismatch names both shapes") {
  Tensor a({2, 3});
  Tensor b({4, 2});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul associativity on well-conditioned inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor({5, 4}, rng);
    Tensor b = random_tensor({4, 6}, rng);
    Tensor c = random_tensor({6, 3}, rng);
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i)
      CHECK(std::fabs(left[i] - right[i]) < 1e-9);
  }
}

TEST_CASE("sorted matmul equals plain matmul up to rounding and is permutation-stable") {
  Rng rng(33);
  Tensor a = random_tensor({6, 6}, rng);
  Tensor b = random_tensor({6, 5}, rng);
  Tensor plain = matmul(a, b);
  Tensor sorted = matmul_sorted(a, b);
  for (std::size_t i = 0; i < plain.size(); ++i)
    CHECK(std::fabs(plain[i] - sorted[i]) < 1e-12);

  // Permute the shared dimension: rows of b, columns of a.
  std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  Tensor ap({6, 6}), bp({6, 5});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) ap.at(i, j) = a.at(i, perm[j]);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) bp.at(i, j) = b.at(perm[i], j);
  CHECK(matmul_sorted(ap, bp).same_bits(sorted));
}

TEST_CASE("softmax examples") {
  Tensor r = softmax_rows(Tensor::row({0, 0}));
  CHECK(r[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(0.5).epsilon(1e-12));

  for (double c : {-3.0, 0.0, 17.5}) {
    Tensor u = softmax_rows(Tensor::row({c, c, c}));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(u[i] - 1.0 / 3.0) < 1e-12);
  }

  Tensor s = softmax_rows(Tensor::row({std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(std::fabs(s[0] - 1.0 / 6.0) < 1e-12);
  CHECK(std::fabs(s[1] - 2.0 / 6.0) < 1e-12);
  CHECK(std::fabs(s[2] - 3.0 / 6.0) < 1e-12);
}

TEST_CASE("softmax rows sum to one and shift invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({4, 7}, rng, -10.0, 10.0);
    Tensor p = softmax_rows(x);
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        sum += p.at(i, j);
        CHECK(p.at(i, j) >= 0.0);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
    double shift = rng.uniform(-5.0, 5.0);
    Tensor xs = x;
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += shift;
    Tensor ps = softmax_rows(xs);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::fabs(p[i] - ps[i]) < 1e-12);
  }
}

TEST_CASE("softmax rejects non-finite input") {
  Tensor x = Tensor::row({1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(softmax_rows(x), NumericError);
}

TEST_CASE("layer norm examples") {
  Tensor gain = Tensor::vec({1, 1, 1});
  Tensor bias = Tensor::vec({0, 0, 0});

  Tensor constant = layer_norm(Tensor::row({2.5, 2.5, 2.5}), gain, bias, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(constant[i] == 0.0);

  Tensor two = layer_norm(Tensor::row({-1, 1}), Tensor::vec({1, 1}), Tensor::vec({0, 0}), 1e-14);
  CHECK(two[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-6));

  const double eps = 1e-5;
  Tensor hand = layer_norm(Tensor::row({0, 2, 4}), gain, bias, eps);
  const double denom = std::sqrt(8.0 / 3.0 + eps);
  CHECK(hand[0] == doctest::Approx((0 - 2.0) / denom).epsilon(1e-12));
  CHECK(hand[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hand[2] == doctest::Approx((4 - 2.0) / denom).epsilon(1e-12));
}

TEST_CASE("layer norm output has zero mean and unit variance pre-affine") {
  Rng rng(11);
  Tensor x = random_tensor({3, 16}, rng, -4.0, 4.0);
  Tensor y = layer_norm(x, Tensor::full({16}, 1.0), Tensor::zeros({16}), 1e-12);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 16; ++j) mean += y.at(i, j);
    mean /= 16.0;
    for (std::size_t j = 0; j < 16; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 16.0;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(std::fabs(var - 1.0) < 1e-9);
  }
}

TEST_CASE("cross entropy examples") {
  Tensor half = Tensor::row({0.5, 0.5});
  CHECK(cross_entropy_rows(half, half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor onehot = Tensor::row({1.0, 0.0});
  CHECK(cross_entropy_rows(onehot, onehot) == doctest::Approx(0.0).epsilon(1e-9));

  // Direct formula: −0.25·log(0.5) − 0.75·log(0.5) = log 2.
  Tensor p = Tensor::row({0.25, 0.75});
  Tensor q = Tensor::row({0.5, 0.5});
  CHECK(cross_entropy_rows(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy is at least the entropy of p") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor p = softmax_rows(random_tensor({2, 5}, rng, -2.0, 2.0));
    Tensor q = softmax_rows(random_tensor({2, 5}, rng, -2.0, 2.0));
    CHECK(cross_entropy_rows(p, q) >= cross_entropy_rows(p, p) - 1e-12);
  }
}

TEST_CASE("finite difference check: quadratic") {
  NamedTensors params{{"x", Tensor::scalar(3.0)}};
  auto objective = [](GradientContext& ctx, const NamedTensors& p) {
    auto b = bind_all(ctx, p);
    return ctx.mul(b.at("x"), b.at("x"));
  };
  auto report = finite_diff_check(objective, params, 1e-5, 1e-6);
  CHECK(report.pass);
  CHECK(report.max_rel_err() < 1e-8);

  GradientContext ctx;
  Value x = ctx.param("x", Tensor::scalar(3.0));
  ctx.backward(ctx.mul(x, x));
  CHECK(ctx.grad_of("x")[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("finite difference check: softmax cross entropy has p-target gradient") {
  Tensor logits = Tensor::row({0.3, -0.7});
  Tensor target = Tensor::row({1.0, 0.0});
  NamedTensors params{{"z", logits}};
  auto objective = [&target](GradientContext& ctx, const NamedTensors& p) {
    auto b = bind_all(ctx, p);
    return ctx.cross_entropy_rows(ctx.constant(target), ctx.softmax_rows(b.at("z")));
  };
  auto report = finite_diff_check(objective, params, 1e-5, 1e-6);
  CHECK(report.pass);

  GradientContext ctx;
  Value z = ctx.param("z", logits);
  ctx.backward(ctx.cross_entropy_rows(ctx.constant(target), ctx.softmax_rows(z)));
  Tensor p = softmax_rows(logits);
  Tensor g = ctx.grad_of("z");
  CHECK(g[0] == doctest::Approx(p[0] - 1.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(p[1]).epsilon(1e-9));
}

TEST_CASE("finite difference check: constant objective yields zero gradients") {
  NamedTensors params{{"x", Tensor::row({1.0, 2.0})}};
  auto objective = [](GradientContext& ctx, const NamedTensors&) { return ctx.constant(5.0); };
  auto report = finite_diff_check(objective, params, 1e-5, 1e-6);
  CHECK(report.pass);

  GradientContext ctx;
  Value x = ctx.param("x", Tensor::row({1.0, 2.0}));
  (void)x;
  ctx.backward(ctx.constant(5.0));
  Tensor g = ctx.grad_of("x");
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("finite difference check rejects a non-deterministic objective") {
  NamedTensors params{{"x", Tensor::scalar(1.0)}};
  int counter = 0;
  auto objective = [&counter](GradientContext& ctx, const NamedTensors& p) {
    auto b = bind_all(ctx, p);
    return ctx.scale(b.at("x"), 1.0 + 0.001 * counter++);
  };
  CHECK_THROWS_AS(finite_diff_check(objective, params, 1e-5, 1e-6), NumericError);
}

TEST_CASE("gradient of an uninvolved parameter is exactly zero") {
  GradientContext ctx;
  Value x = ctx.param("x", Tensor::scalar(2.0));
  Value unused = ctx.param("unused", Tensor::row({1, 2, 3}));
  (void)unused;
  ctx.backward(ctx.mul(x, x));
  Tensor g = ctx.grad_of("unused");
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

// Covers each tape op's backward rule against central differences.
TEST_CASE("per-op gradients match finite differences") {
  Rng rng(17);
  NamedTensors params{
      {"a", random_tensor({3, 4}, rng)},
      {"b", random_tensor({4, 3}, rng)},
      {"v", random_tensor({4}, rng)},
      {"row", random_tensor({1, 4}, rng)},
      {"gain", random_tensor({4}, rng, 0.5, 1.5)},
      {"bias", random_tensor({4}, rng)},
      {"s", Tensor::scalar(1.7)},
      {"pos", random_tensor({3, 4}, rng, 0.1, 2.0)},
  };

  auto check = [&](const char* label, const ObjectiveBuilder& f) {
    INFO(label);
    auto report = finite_diff_check(f, params, 1e-5, 1e-6);
    CHECK(report.pass);
  };

  check("matmul+relu", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.relu(c.matmul(b.at("a"), b.at("b"))));
  });
  check("matmul_nodesum", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.matmul_nodesum(b.at("a"), b.at("b")));
  });
  check("transpose+mul", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.sum_all(c.mul(c.transpose(b.at("a")), b.at("b")));
  });
  check("add/sub/scale", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.sum_all(c.scale(c.sub(c.add(b.at("a"), b.at("pos")), b.at("a")), 0.3));
  });
  check("div", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.sum_all(c.div(b.at("a"), b.at("pos")));
  });
  check("rowvec ops", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.sub_rowvec(c.add_rowvec(b.at("a"), b.at("v")), b.at("bias")));
  });
  check("div_by_scalar", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.sum_all(c.div_by_scalar(b.at("a"), b.at("s")));
  });
  check("gelu", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.gelu(b.at("a")));
  });
  check("softmax", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.select_element(c.softmax_rows(b.at("a")), 1, 2);
  });
  check("layer_norm", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.layer_norm(b.at("a"), b.at("gain"), b.at("bias"), 1e-5));
  });
  check("log_clamped", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.log_clamped(b.at("pos")));
  });
  check("sqrt", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.sqrt_elem(b.at("pos")));
  });
  check("concat_rows+slice", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    Value cat = c.concat_rows(b.at("row"), b.at("a"));
    return c.mean_all(c.slice_rows(cat, 1, 3));
  });
  check("concat_cols", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.concat_cols({b.at("a"), b.at("pos")}));
  });
  check("gather_rows", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.gather_rows(b.at("a"), {2, 0, 2}));
  });
  check("replace_rows", [](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    return c.mean_all(c.replace_rows(b.at("a"), b.at("row"), {1, 0, 1}));
  });
  check("cross_entropy both sides", [](GradientContext& c, const NamedTensors& nt) {
    auto b = bind_all(c, nt);
    Value p = c.softmax_rows(b.at("a"));
    Value q = c.softmax_rows(b.at("pos"));
    return c.cross_entropy_rows(p, q);
  });
}

TEST_CASE("composition gradients to depth 10 stay within tolerance") {
  Rng rng(19);
  NamedTensors params{
      {"w1", random_tensor({5, 5}, rng, -0.5, 0.5)},
      {"w2", random_tensor({5, 5}, rng, -0.5, 0.5)},
      {"gain", random_tensor({5}, rng, 0.5, 1.5)},
      {"bias", random_tensor({5}, rng, -0.2, 0.2)},
  };
  Tensor x0 = random_tensor({4, 5}, rng);
  auto objective = [&x0](GradientContext& c, const NamedTensors& p) {
    auto b = bind_all(c, p);
    Value x = c.constant(x0);
    for (int depth = 0; depth < 5; ++depth) {
      x = c.gelu(c.matmul(x, b.at("w1")));
      x = c.layer_norm(c.matmul(x, b.at("w2")), b.at("gain"), b.at("bias"), 1e-5);
    }
    return c.cross_entropy_rows(c.constant(softmax_rows(x0)), c.softmax_rows(x));
  };
  auto report = finite_diff_check(objective, params, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("tensor stream round trips and preserves header order") {
  Rng rng(23);
  std::vector<NamedTensor> tensors;
  tensors.push_back({"alpha", random_tensor({2, 3}, rng)});
  tensors.push_back({"beta", random_tensor({4}, rng)});
  tensors.push_back({"gamma", random_tensor({2, 2, 3}, rng)});

  std::stringstream ss;
  write_tensors(ss, tensors);
  auto loaded = read_tensors(ss);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].name == tensors[i].name);
    CHECK(loaded[i].tensor.same_bits(tensors[i].tensor));
  }
}

TEST_CASE("truncated tensor stream is rejected") {
  std::vector<NamedTensor> tensors{{"t", Tensor::full({4, 4}, 1.5)}};
  std::stringstream ss;
  write_tensors(ss, tensors);
  std::string blob = ss.str();
  std::stringstream cut(blob.substr(0, blob.size() - 8));
  CHECK_THROWS_AS(read_tensors(cut), DataError);
}

TEST_CASE("rng streams are decoupled and reproducible") {
  Rng a = Rng::stream(42, "mask");
  Rng a2 = Rng::stream(42, "mask");
  Rng b = Rng::stream(42, "augment");
  CHECK(a.bits() == a2.bits());
  CHECK(Rng::stream(42, "mask").bits() != b.bits());
}
