#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sgt/errors.hpp"

namespace sgt::num {

// Dense row-major array of 64-bit floats. Rank is 1..3 in practice
// (vectors, matrices, H×W×C images).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor identity(std::size_t n);
  static Tensor row(std::vector<double> values);  // 1×n matrix
  static Tensor vec(std::vector<double> values);  // rank-1
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool same_bits(const Tensor& other) const;  // shape and bit pattern equal
  bool all_finite() const;
  double item() const;  // value of a single-element tensor
  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::size_t cols_ = 0;  // trailing dimension, cached for at()
};

// Clamp floor applied inside logs so distillation losses stay finite when a
// probability underflows to zero.
inline constexpr double kLogClamp = 1e-12;

// ---------------------------------------------------------------------------
// Plain kernels (no gradient tracking). GradientContext reuses these for its
// forward values, so taped and untaped evaluation agree bit for bit.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// Folds each output entry's product multiset in ascending value order, which
// makes the result invariant to a simultaneous permutation of the shared
// dimension. Used where graph-node order must not leak into results.
Tensor matmul_sorted(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // v is rank-1, length = cols
Tensor sub_rowvec(const Tensor& m, const Tensor& v);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor gelu_grad(const Tensor& a);
Tensor softmax_rows(const Tensor& a);  // throws NumericError on non-finite input
// Same result up to rounding, with the normalizing sum folded in ascending
// value order so a permutation of the row entries permutes the output exactly.
Tensor softmax_rows_sorted(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
double cross_entropy_rows(const Tensor& p, const Tensor& q);  // (1/m)·Σ −pᵢᵀ log qᵢ
Tensor log_clamped(const Tensor& a);
double sum_all(const Tensor& a);
double frobenius(const Tensor& a);

// Raw accumulate-into kernels used by backward passes. c must be presized;
// *_nt / *_tn take b / a transposed.
void matmul_nn_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                   std::size_t n);
void matmul_nt_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                   std::size_t n);
void matmul_tn_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                   std::size_t n);

void require_matrix(const Tensor& t, const char* what);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace sgt::num
