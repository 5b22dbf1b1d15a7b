#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sgt/tensor.hpp"

namespace sgt::num {

class GradientContext;

// Handle to a node on a GradientContext's tape. Cheap to copy; valid for the
// lifetime of the owning context.
class Value {
 public:
  Value() = default;

  const Tensor& tensor() const;
  bool tracked() const;
  std::size_t index() const { return node_; }
  explicit operator bool() const { return ctx_ != nullptr; }

 private:
  friend class GradientContext;
  Value(GradientContext* ctx, std::size_t node) : ctx_(ctx), node_(node) {}
  GradientContext* ctx_ = nullptr;
  std::size_t node_ = 0;
};

// Records a forward computation as an op graph and backpropagates gradients
// of a scalar objective to every tracked parameter. Confine one context to a
// single thread; the tensors it returns are immutable views into the tape.
class GradientContext {
 public:
  GradientContext() = default;
  GradientContext(const GradientContext&) = delete;
  GradientContext& operator=(const GradientContext&) = delete;

  // Tracked leaf. Names must be unique within a context.
  Value param(const std::string& name, const Tensor& t);
  // Untracked leaf; never receives gradient.
  Value constant(const Tensor& t);
  Value constant(double v) { return constant(Tensor::scalar(v)); }

  Value matmul(Value a, Value b);
  // Order-independent accumulation over the shared dimension (see
  // matmul_sorted); use on reductions indexed by graph nodes.
  Value matmul_nodesum(Value a, Value b);
  Value transpose(Value a);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);  // Hadamard
  Value div(Value a, Value b);  // elementwise, same shape
  Value scale(Value a, double s);
  Value add_rowvec(Value m, Value v);
  Value sub_rowvec(Value m, Value v);
  Value div_by_scalar(Value m, Value s);  // s has a single element
  Value relu(Value a);
  Value gelu(Value a);
  // sorted_sum folds each row's normalizer in ascending value order
  // (entry-permutation equivariant, slightly slower).
  Value softmax_rows(Value a, bool sorted_sum = false);
  Value layer_norm(Value x, Value gain, Value bias, double eps);
  Value log_clamped(Value a);
  Value cross_entropy_rows(Value p, Value q);  // scalar
  Value sum_all(Value a);
  Value mean_all(Value a);
  Value sqrt_elem(Value a);
  Value concat_rows(Value a, Value b);
  Value concat_cols(const std::vector<Value>& parts);
  Value slice_rows(Value a, std::size_t begin, std::size_t end);
  Value gather_rows(Value a, std::vector<std::size_t> indices);
  // out row i = mask[i] ? row : x row i. row is 1×n.
  Value replace_rows(Value x, Value row, std::vector<std::uint8_t> mask);
  Value select_element(Value a, std::size_t r, std::size_t c);  // 1×1

  // Backpropagates from a single-element objective. Returns its value.
  // May be called once per context.
  double backward(Value objective);

  const Tensor& value(Value v) const;
  // Gradient of a node; zeros if the objective does not reach it.
  Tensor grad(Value v) const;
  Tensor grad_of(const std::string& param_name) const;
  bool has_param(const std::string& name) const { return params_.count(name) != 0; }
  std::vector<std::string> param_names() const;

 private:
  struct Node {
    Tensor val;
    Tensor grad;  // lazily allocated
    bool tracked = false;
    std::function<void(GradientContext&)> back;  // null for leaves
  };

  Value make(Tensor val, bool tracked, std::function<void(GradientContext&)> back);
  Tensor& grad_buf(std::size_t node);
  void accumulate(std::size_t node, const Tensor& g);

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  bool backward_done_ = false;

  friend class Value;
};

// ---------------------------------------------------------------------------
// Gradient verification against central finite differences.
// ---------------------------------------------------------------------------

using NamedTensors = std::map<std::string, Tensor>;
using BoundParams = std::map<std::string, Value>;
// Builds a single-element objective from the given tensors. The builder is
// responsible for binding them (ctx.param with the same names, possibly via
// model binding helpers); unbound names count as zero-gradient. Must be
// deterministic; the checker re-evaluates and rejects mismatches.
using ObjectiveBuilder = std::function<Value(GradientContext&, const NamedTensors&)>;

// Binds every named tensor as a parameter. Convenience for simple objectives.
BoundParams bind_all(GradientContext& ctx, const NamedTensors& params);

struct FiniteDiffEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct FiniteDiffReport {
  std::vector<FiniteDiffEntry> entries;
  double tolerance = 0.0;
  bool pass = false;
  double max_rel_err() const;
};

// Error metric per element: |analytic − fd| / max(1, |analytic|, |fd|).
FiniteDiffReport finite_diff_check(const ObjectiveBuilder& objective, const NamedTensors& params,
                                   double step, double tolerance);

}  // namespace sgt::num
