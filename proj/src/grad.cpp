#include "sgt/grad.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

namespace sgt::num {

const Tensor& Value::tensor() const { return ctx_->value(*this); }
bool Value::tracked() const { return ctx_->nodes_[node_].tracked; }

Value GradientContext::make(Tensor val, bool tracked, std::function<void(GradientContext&)> back) {
  nodes_.push_back(Node{std::move(val), Tensor{}, tracked, std::move(back)});
  return Value(this, nodes_.size() - 1);
}

Value GradientContext::param(const std::string& name, const Tensor& t) {
  if (params_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Value v = make(t, true, nullptr);
  params_[name] = v.node_;
  return v;
}

Value GradientContext::constant(const Tensor& t) { return make(t, false, nullptr); }

const Tensor& GradientContext::value(Value v) const { return nodes_[v.node_].val; }

Tensor& GradientContext::grad_buf(std::size_t node) {
  Node& n = nodes_[node];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.val.shape());
  return n.grad;
}

void GradientContext::accumulate(std::size_t node, const Tensor& g) {
  Tensor& buf = grad_buf(node);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

Tensor GradientContext::grad(Value v) const {
  const Node& n = nodes_[v.node_];
  if (n.grad.empty()) return Tensor::zeros(n.val.shape());
  return n.grad;
}

Tensor GradientContext::grad_of(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return grad(Value(const_cast<GradientContext*>(this), it->second));
}

std::vector<std::string> GradientContext::param_names() const {
  std::vector<std::string> names;
  names.reserve(params_.size());
  for (const auto& [name, idx] : params_) names.push_back(name);
  return names;
}

double GradientContext::backward(Value objective) {
  if (backward_done_) throw ConfigError("backward() may run once per context");
  backward_done_ = true;
  const Node& obj = nodes_[objective.node_];
  if (obj.val.size() != 1) {
    throw ShapeError("backward: objective must be a single element, got " + obj.val.shape_str());
  }
  const double result = obj.val[0];
  grad_buf(objective.node_)[0] = 1.0;
  for (std::size_t i = objective.node_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.tracked || n.grad.empty() || !n.back) continue;
    n.back(*this);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Ops. Backward closures capture node indices, never references: the tape
// vector may reallocate as nodes are appended.
// ---------------------------------------------------------------------------

#define SGT_SELF_GRAD const Tensor& g = ctx.nodes_[self].grad

Value GradientContext::matmul(Value a, Value b) {
  Tensor out = num::matmul(value(a), value(b));
  const bool ta = a.tracked(), tb = b.tracked();
  Value v = make(std::move(out), ta || tb, nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  nodes_[self].back = [self, ia, ib, ta, tb](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& av = ctx.nodes_[ia].val;
    const Tensor& bv = ctx.nodes_[ib].val;
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (ta) matmul_nt_acc(ctx.grad_buf(ia).data(), g.data(), bv.data(), m, n, k);
    if (tb) matmul_tn_acc(ctx.grad_buf(ib).data(), av.data(), g.data(), k, m, n);
  };
  return v;
}

Value GradientContext::matmul_nodesum(Value a, Value b) {
  Tensor out = num::matmul_sorted(value(a), value(b));
  const bool ta = a.tracked(), tb = b.tracked();
  Value v = make(std::move(out), ta || tb, nullptr);
  if (!v.tracked()) return v;
  // Plain accumulation in the backward pass: gradient order sensitivity does
  // not affect the forward invariance contract.
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  nodes_[self].back = [self, ia, ib, ta, tb](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& av = ctx.nodes_[ia].val;
    const Tensor& bv = ctx.nodes_[ib].val;
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    if (ta) matmul_nt_acc(ctx.grad_buf(ia).data(), g.data(), bv.data(), m, n, k);
    if (tb) matmul_tn_acc(ctx.grad_buf(ib).data(), av.data(), g.data(), k, m, n);
  };
  return v;
}

Value GradientContext::transpose(Value a) {
  Value v = make(num::transpose(value(a)), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    SGT_SELF_GRAD;
    ctx.accumulate(ia, num::transpose(g));
  };
  return v;
}

Value GradientContext::add(Value a, Value b) {
  Value v = make(num::add(value(a), value(b)), a.tracked() || b.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  const bool ta = a.tracked(), tb = b.tracked();
  nodes_[self].back = [self, ia, ib, ta, tb](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (ta) ctx.accumulate(ia, g);
    if (tb) ctx.accumulate(ib, g);
  };
  return v;
}

Value GradientContext::sub(Value a, Value b) {
  Value v = make(num::sub(value(a), value(b)), a.tracked() || b.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  const bool ta = a.tracked(), tb = b.tracked();
  nodes_[self].back = [self, ia, ib, ta, tb](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (ta) ctx.accumulate(ia, g);
    if (tb) ctx.accumulate(ib, num::scale(g, -1.0));
  };
  return v;
}

Value GradientContext::mul(Value a, Value b) {
  Value v = make(num::hadamard(value(a), value(b)), a.tracked() || b.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  const bool ta = a.tracked(), tb = b.tracked();
  nodes_[self].back = [self, ia, ib, ta, tb](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (ta) ctx.accumulate(ia, num::hadamard(g, ctx.nodes_[ib].val));
    if (tb) ctx.accumulate(ib, num::hadamard(g, ctx.nodes_[ia].val));
  };
  return v;
}

Value GradientContext::div(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "div");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  Value v = make(std::move(out), a.tracked() || b.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  const bool ta = a.tracked(), tb = b.tracked();
  nodes_[self].back = [self, ia, ib, ta, tb](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& av2 = ctx.nodes_[ia].val;
    const Tensor& bv2 = ctx.nodes_[ib].val;
    if (ta) {
      Tensor da = g;
      for (std::size_t i = 0; i < da.size(); ++i) da[i] /= bv2[i];
      ctx.accumulate(ia, da);
    }
    if (tb) {
      Tensor db = g;
      for (std::size_t i = 0; i < db.size(); ++i) db[i] *= -av2[i] / (bv2[i] * bv2[i]);
      ctx.accumulate(ib, db);
    }
  };
  return v;
}

Value GradientContext::scale(Value a, double s) {
  Value v = make(num::scale(value(a), s), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia, s](GradientContext& ctx) {
    SGT_SELF_GRAD;
    ctx.accumulate(ia, num::scale(g, s));
  };
  return v;
}

Value GradientContext::add_rowvec(Value m, Value vvec) {
  Value v = make(num::add_rowvec(value(m), value(vvec)), m.tracked() || vvec.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, im = m.node_, iv = vvec.node_;
  const bool tm = m.tracked(), tv = vvec.tracked();
  nodes_[self].back = [self, im, iv, tm, tv](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (tm) ctx.accumulate(im, g);
    if (tv) {
      Tensor& dv = ctx.grad_buf(iv);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) dv[j] += g.at(i, j);
    }
  };
  return v;
}

Value GradientContext::sub_rowvec(Value m, Value vvec) {
  Value v = make(num::sub_rowvec(value(m), value(vvec)), m.tracked() || vvec.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, im = m.node_, iv = vvec.node_;
  const bool tm = m.tracked(), tv = vvec.tracked();
  nodes_[self].back = [self, im, iv, tm, tv](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (tm) ctx.accumulate(im, g);
    if (tv) {
      Tensor& dv = ctx.grad_buf(iv);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) dv[j] -= g.at(i, j);
    }
  };
  return v;
}

Value GradientContext::div_by_scalar(Value m, Value s) {
  if (value(s).size() != 1) {
    throw ShapeError("div_by_scalar: divisor must have one element, got " + value(s).shape_str());
  }
  const double sv = value(s)[0];
  Value v = make(num::scale(value(m), 1.0 / sv), m.tracked() || s.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, im = m.node_, is = s.node_;
  const bool tm = m.tracked(), ts = s.tracked();
  nodes_[self].back = [self, im, is, tm, ts](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const double s2 = ctx.nodes_[is].val[0];
    if (tm) ctx.accumulate(im, num::scale(g, 1.0 / s2));
    if (ts) {
      const Tensor& mv = ctx.nodes_[im].val;
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * mv[i];
      ctx.grad_buf(is)[0] += -acc / (s2 * s2);
    }
  };
  return v;
}

Value GradientContext::relu(Value a) {
  Value v = make(num::relu(value(a)), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& av = ctx.nodes_[ia].val;
    Tensor da = g;
    for (std::size_t i = 0; i < da.size(); ++i)
      if (av[i] <= 0.0) da[i] = 0.0;
    ctx.accumulate(ia, da);
  };
  return v;
}

Value GradientContext::gelu(Value a) {
  Value v = make(num::gelu(value(a)), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    SGT_SELF_GRAD;
    ctx.accumulate(ia, num::hadamard(g, num::gelu_grad(ctx.nodes_[ia].val)));
  };
  return v;
}

Value GradientContext::softmax_rows(Value a, bool sorted_sum) {
  Value v = make(sorted_sum ? num::softmax_rows_sorted(value(a)) : num::softmax_rows(value(a)),
                 a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& p = ctx.nodes_[self].val;
    Tensor da = Tensor::zeros(p.shape());
    const std::size_t n = p.cols();
    for (std::size_t i = 0; i < p.rows(); ++i) {
      const double* pr = p.data() + i * n;
      const double* gr = g.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gr[j] * pr[j];
      double* dr = da.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dr[j] = pr[j] * (gr[j] - dot);
    }
    ctx.accumulate(ia, da);
  };
  return v;
}

Value GradientContext::layer_norm(Value x, Value gain, Value bias, double eps) {
  Value v = make(num::layer_norm(value(x), value(gain), value(bias), eps),
                 x.tracked() || gain.tracked() || bias.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ix = x.node_, ig = gain.node_, ib = bias.node_;
  const bool tx = x.tracked(), tg = gain.tracked(), tb = bias.tracked();
  nodes_[self].back = [self, ix, ig, ib, tx, tg, tb, eps](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& xv = ctx.nodes_[ix].val;
    const Tensor& gv = ctx.nodes_[ig].val;
    const std::size_t n = xv.cols();
    const double dn = static_cast<double>(n);
    Tensor dx = tx ? Tensor::zeros(xv.shape()) : Tensor{};
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      const double* row = xv.data() + i * n;
      const double* grow = g.data() + i * n;
      double mean = 0.0;
      for (std::size_t j = 0; j < n; ++j) mean += row[j];
      mean /= dn;
      double var = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double d = row[j] - mean;
        var += d * d;
      }
      var /= dn;
      const double inv = 1.0 / std::sqrt(var + eps);
      // dxh = dy ⊙ gain; dx = inv·(dxh − mean(dxh) − xh·mean(dxh⊙xh))
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double xh = (row[j] - mean) * inv;
        double dxh = grow[j] * gv[j];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh;
        if (tg) ctx.grad_buf(ig)[j] += grow[j] * xh;
        if (tb) ctx.grad_buf(ib)[j] += grow[j];
      }
      mean_dxh /= dn;
      mean_dxh_xh /= dn;
      if (tx) {
        double* dr = dx.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          double xh = (row[j] - mean) * inv;
          dr[j] = inv * (grow[j] * gv[j] - mean_dxh - xh * mean_dxh_xh);
        }
      }
    }
    if (tx) ctx.accumulate(ix, dx);
  };
  return v;
}

Value GradientContext::log_clamped(Value a) {
  Value v = make(num::log_clamped(value(a)), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& av = ctx.nodes_[ia].val;
    Tensor da = g;
    for (std::size_t i = 0; i < da.size(); ++i) da[i] = av[i] > kLogClamp ? da[i] / av[i] : 0.0;
    ctx.accumulate(ia, da);
  };
  return v;
}

Value GradientContext::cross_entropy_rows(Value p, Value q) {
  const Tensor& pv = value(p);
  const Tensor& qv = value(q);
  Value v = make(Tensor::scalar(num::cross_entropy_rows(pv, qv)), p.tracked() || q.tracked(),
                 nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ip = p.node_, iq = q.node_;
  const bool tp = p.tracked(), tq = q.tracked();
  nodes_[self].back = [self, ip, iq, tp, tq](GradientContext& ctx) {
    const double g = ctx.nodes_[self].grad[0];
    const Tensor& pv2 = ctx.nodes_[ip].val;
    const Tensor& qv2 = ctx.nodes_[iq].val;
    const double inv_m = 1.0 / static_cast<double>(pv2.rows());
    if (tp) {
      Tensor dp = Tensor::zeros(pv2.shape());
      for (std::size_t i = 0; i < dp.size(); ++i)
        dp[i] = -g * inv_m * std::log(std::max(qv2[i], kLogClamp));
      ctx.accumulate(ip, dp);
    }
    if (tq) {
      Tensor dq = Tensor::zeros(qv2.shape());
      for (std::size_t i = 0; i < dq.size(); ++i)
        dq[i] = qv2[i] > kLogClamp ? -g * inv_m * pv2[i] / qv2[i] : 0.0;
      ctx.accumulate(iq, dq);
    }
  };
  return v;
}

Value GradientContext::sum_all(Value a) {
  Value v = make(Tensor::scalar(num::sum_all(value(a))), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    const double g = ctx.nodes_[self].grad[0];
    Tensor& da = ctx.grad_buf(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
  };
  return v;
}

Value GradientContext::mean_all(Value a) {
  const double inv = 1.0 / static_cast<double>(value(a).size());
  Value v = make(Tensor::scalar(num::sum_all(value(a)) * inv), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia, inv](GradientContext& ctx) {
    const double g = ctx.nodes_[self].grad[0] * inv;
    Tensor& da = ctx.grad_buf(ia);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
  };
  return v;
}

Value GradientContext::sqrt_elem(Value a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(out[i]);
  Value v = make(std::move(out), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia](GradientContext& ctx) {
    SGT_SELF_GRAD;
    const Tensor& sv = ctx.nodes_[self].val;
    Tensor da = g;
    for (std::size_t i = 0; i < da.size(); ++i) da[i] = 0.5 * da[i] / sv[i];
    ctx.accumulate(ia, da);
  };
  return v;
}

Value GradientContext::concat_rows(Value a, Value b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_matrix(av, "concat_rows");
  require_matrix(bv, "concat_rows");
  if (av.cols() != bv.cols()) {
    throw ShapeError("concat_rows: column mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  const std::size_t asize = av.size();
  Tensor out({av.rows() + bv.rows(), av.cols()});
  std::copy(av.data(), av.data() + av.size(), out.data());
  std::copy(bv.data(), bv.data() + bv.size(), out.data() + av.size());
  // av/bv dangle past this point: make() may grow the tape vector.
  Value v = make(std::move(out), a.tracked() || b.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_, ib = b.node_;
  const bool ta = a.tracked(), tb = b.tracked();
  nodes_[self].back = [self, ia, ib, ta, tb, asize](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (ta) {
      Tensor& da = ctx.grad_buf(ia);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i];
    }
    if (tb) {
      Tensor& db = ctx.grad_buf(ib);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[asize + i];
    }
  };
  return v;
}

Value GradientContext::concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty part list");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t total_cols = 0;
  bool tracked = false;
  for (const Value& p : parts) {
    require_matrix(value(p), "concat_cols");
    if (value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
    total_cols += value(p).cols();
    tracked = tracked || p.tracked();
  }
  Tensor out({rows, total_cols});
  std::size_t col0 = 0;
  for (const Value& p : parts) {
    const Tensor& pv = value(p);
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(pv.data() + i * pv.cols(), pv.data() + (i + 1) * pv.cols(),
                out.data() + i * total_cols + col0);
    col0 += pv.cols();
  }
  Value v = make(std::move(out), tracked, nullptr);
  if (!tracked) return v;
  std::vector<std::size_t> idx;
  std::vector<std::size_t> widths;
  std::vector<bool> track;
  for (const Value& p : parts) {
    idx.push_back(p.node_);
    widths.push_back(value(p).cols());
    track.push_back(p.tracked());
  }
  const std::size_t self = v.node_;
  nodes_[self].back = [self, idx, widths, track, rows, total_cols](GradientContext& ctx) {
    SGT_SELF_GRAD;
    std::size_t col0b = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (track[k]) {
        Tensor& dp = ctx.grad_buf(idx[k]);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j)
            dp[i * widths[k] + j] += g[i * total_cols + col0b + j];
      }
      col0b += widths[k];
    }
  };
  return v;
}

Value GradientContext::slice_rows(Value a, std::size_t begin, std::size_t end) {
  const Tensor& av = value(a);
  require_matrix(av, "slice_rows");
  if (begin >= end || end > av.rows()) throw ShapeError("slice_rows: bad range");
  const std::size_t n = av.cols();
  Tensor out({end - begin, n});
  std::copy(av.data() + begin * n, av.data() + end * n, out.data());
  Value v = make(std::move(out), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia, begin, n](GradientContext& ctx) {
    SGT_SELF_GRAD;
    Tensor& da = ctx.grad_buf(ia);
    for (std::size_t i = 0; i < g.size(); ++i) da[begin * n + i] += g[i];
  };
  return v;
}

Value GradientContext::gather_rows(Value a, std::vector<std::size_t> indices) {
  const Tensor& av = value(a);
  require_matrix(av, "gather_rows");
  const std::size_t n = av.cols();
  Tensor out({indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(av.data() + indices[i] * n, av.data() + (indices[i] + 1) * n, out.data() + i * n);
  }
  Value v = make(std::move(out), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia, indices = std::move(indices), n](GradientContext& ctx) {
    SGT_SELF_GRAD;
    Tensor& da = ctx.grad_buf(ia);
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) da[indices[i] * n + j] += g[i * n + j];
  };
  return v;
}

Value GradientContext::replace_rows(Value x, Value row, std::vector<std::uint8_t> mask) {
  const Tensor& xv = value(x);
  const Tensor& rv = value(row);
  require_matrix(xv, "replace_rows");
  if (rv.rank() != 2 || rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw ShapeError("replace_rows: row " + rv.shape_str() + " does not match " + xv.shape_str());
  }
  if (mask.size() != xv.rows()) throw ShapeError("replace_rows: mask length mismatch");
  const std::size_t n = xv.cols();
  Tensor out = xv;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) std::copy(rv.data(), rv.data() + n, out.data() + i * n);
  Value v = make(std::move(out), x.tracked() || row.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ixx = x.node_, ir = row.node_;
  const bool tx = x.tracked(), tr = row.tracked();
  nodes_[self].back = [self, ixx, ir, tx, tr, mask = std::move(mask), n](GradientContext& ctx) {
    SGT_SELF_GRAD;
    if (tx) {
      Tensor& dx = ctx.grad_buf(ixx);
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i])
          for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += g[i * n + j];
    }
    if (tr) {
      Tensor& dr = ctx.grad_buf(ir);
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i])
          for (std::size_t j = 0; j < n; ++j) dr[j] += g[i * n + j];
    }
  };
  return v;
}

Value GradientContext::select_element(Value a, std::size_t r, std::size_t c) {
  const Tensor& av = value(a);
  require_matrix(av, "select_element");
  if (r >= av.rows() || c >= av.cols()) throw ShapeError("select_element: index out of range");
  const std::size_t flat = r * av.cols() + c;
  Value v = make(Tensor::scalar(av.at(r, c)), a.tracked(), nullptr);
  if (!v.tracked()) return v;
  const std::size_t self = v.node_, ia = a.node_;
  nodes_[self].back = [self, ia, flat](GradientContext& ctx) {
    ctx.grad_buf(ia)[flat] += ctx.nodes_[self].grad[0];
  };
  return v;
}

#undef SGT_SELF_GRAD

// ---------------------------------------------------------------------------

double FiniteDiffReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_err);
  return m;
}

BoundParams bind_all(GradientContext& ctx, const NamedTensors& params) {
  BoundParams bound;
  for (const auto& [name, t] : params) bound[name] = ctx.param(name, t);
  return bound;
}

namespace {

double evaluate_objective(const ObjectiveBuilder& objective, const NamedTensors& params) {
  GradientContext ctx;
  Value out = objective(ctx, params);
  const Tensor& t = ctx.value(out);
  if (t.size() != 1) throw ShapeError("finite_diff_check: objective must be a single element");
  return t[0];
}

}  // namespace

FiniteDiffReport finite_diff_check(const ObjectiveBuilder& objective, const NamedTensors& params,
                                   double step, double tolerance) {
  // Analytic pass.
  GradientContext ctx;
  Value out = objective(ctx, params);
  const double value = ctx.backward(out);

  // Determinism gate: a second evaluation must reproduce the value bit-exactly.
  const double revalue = evaluate_objective(objective, params);
  if (std::memcmp(&value, &revalue, sizeof(double)) != 0) {
    throw NumericError("finite_diff_check: objective is not deterministic");
  }

  FiniteDiffReport report;
  report.tolerance = tolerance;
  report.pass = true;
  for (const auto& [name, t] : params) {
    Tensor analytic = ctx.has_param(name) ? ctx.grad_of(name) : Tensor::zeros(t.shape());
    FiniteDiffEntry entry{name, 0.0};
    NamedTensors perturbed = params;
    for (std::size_t i = 0; i < t.size(); ++i) {
      perturbed[name][i] = t[i] + step;
      const double hi = evaluate_objective(objective, perturbed);
      perturbed[name][i] = t[i] - step;
      const double lo = evaluate_objective(objective, perturbed);
      perturbed[name][i] = t[i];
      const double fd = (hi - lo) / (2.0 * step);
      const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(fd)});
      entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(analytic[i] - fd) / denom);
    }
    if (entry.max_rel_err >= tolerance) report.pass = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace sgt::num
