#include "sgt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace sgt::num {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(shape_product(shape_), 0.0);
  cols_ = shape_.empty() ? 0 : shape_.back();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor data length does not match shape " + shape_str());
  }
  cols_ = shape_.back();
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::vec(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  Tensor t({rows.size(), rows.front().size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != t.cols()) throw ShapeError("ragged row list");
    std::copy(rows[r].begin(), rows[r].end(), t.data() + r * t.cols());
  }
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_str());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_str());
  return shape_[1];
}

bool Tensor::same_bits(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str());
  return data_[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << "]";
  return os.str();
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected a matrix, got " + t.shape_str());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

// ---------------------------------------------------------------------------

void matmul_nn_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                   std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

namespace {

// Scratch for materialized transposes in the backward kernels. The nn loop
// vectorizes; the dot-product formulations do not.
std::vector<double>& transpose_scratch() {
  thread_local std::vector<double> buf;
  return buf;
}

void transpose_into(std::vector<double>& out, const double* src, std::size_t rows,
                    std::size_t cols) {
  out.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
}

}  // namespace

void matmul_nt_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                   std::size_t n) {
  // c[m×n] += a[m×k] · bᵀ where b is n×k.
  std::vector<double>& bt = transpose_scratch();
  transpose_into(bt, b, n, k);
  matmul_nn_acc(c, a, bt.data(), m, k, n);
}

void matmul_tn_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                   std::size_t n) {
  // c[m×n] += aᵀ · b where a is k×m, b is k×n.
  std::vector<double>& at = transpose_scratch();
  transpose_into(at, a, k, m);
  matmul_nn_acc(c, at.data(), b, m, k, n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor c({a.rows(), b.cols()});
  matmul_nn_acc(c.data(), a.data(), b.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor matmul_sorted(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) {
        double t = ai[p] * b.data()[p * n + j];
        terms[p] = (t == 0.0) ? 0.0 : t;  // collapse -0.0 so zeros sort identically
      }
      std::sort(terms.begin(), terms.end());
      double acc = 0.0;
      for (double t : terms) acc += t;
      c.data()[i * n + j] = acc;
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

Tensor scale(const Tensor& a, double s) {
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= s;
  return c;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_matrix(m, "add_rowvec");
  if (v.rank() != 1 || v.size() != m.cols()) {
    throw ShapeError("add_rowvec: vector " + v.shape_str() + " does not match " + m.shape_str());
  }
  Tensor c = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) c.at(i, j) += v[j];
  return c;
}

Tensor sub_rowvec(const Tensor& m, const Tensor& v) {
  require_matrix(m, "sub_rowvec");
  if (v.rank() != 1 || v.size() != m.cols()) {
    throw ShapeError("sub_rowvec: vector " + v.shape_str() + " does not match " + m.shape_str());
  }
  Tensor c = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) c.at(i, j) -= v[j];
  return c;
}

Tensor relu(const Tensor& a) {
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = c[i] > 0.0 ? c[i] : 0.0;
  return c;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double x = c[i];
    c[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  return c;
}

Tensor gelu_grad(const Tensor& a) {
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double x = c[i];
    double u = kGeluC * (x + kGeluA * x * x * x);
    double t = std::tanh(u);
    double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    c[i] = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
  }
  return c;
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  if (!a.all_finite()) throw NumericError("softmax_rows: non-finite input");
  Tensor c = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* row = c.data() + i * a.cols();
    double mx = row[0];
    for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < a.cols(); ++j) row[j] /= sum;
  }
  return c;
}

Tensor softmax_rows_sorted(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  if (!a.all_finite()) throw NumericError("softmax_rows: non-finite input");
  Tensor c = a;
  std::vector<double> exps(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* row = c.data() + i * a.cols();
    double mx = row[0];
    for (std::size_t j = 1; j < a.cols(); ++j) mx = std::max(mx, row[j]);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      row[j] = std::exp(row[j] - mx);
      exps[j] = row[j];
    }
    std::sort(exps.begin(), exps.end());
    double sum = 0.0;
    for (double e : exps) sum += e;
    for (std::size_t j = 0; j < a.cols(); ++j) row[j] /= sum;
  }
  return c;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_matrix(x, "layer_norm");
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be > 0");
  if (gain.rank() != 1 || gain.size() != x.cols() || bias.rank() != 1 || bias.size() != x.cols()) {
    throw ShapeError("layer_norm: gain/bias " + gain.shape_str() + "/" + bias.shape_str() +
                     " do not match " + x.shape_str());
  }
  const std::size_t n = x.cols();
  Tensor c = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* row = c.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) row[j] = gain[j] * ((row[j] - mean) * inv) + bias[j];
  }
  return c;
}

Tensor log_clamped(const Tensor& a) {
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::log(std::max(c[i], kLogClamp));
  return c;
}

double cross_entropy_rows(const Tensor& p, const Tensor& q) {
  require_matrix(p, "cross_entropy_rows");
  require_same_shape(p, q, "cross_entropy_rows");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total -= p[i] * std::log(std::max(q[i], kLogClamp));
  return total / static_cast<double>(p.rows());
}

double sum_all(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

double frobenius(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

}  // namespace sgt::num
