// Copyright 2026 The fnproc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fnproc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fnproc/kernels.hpp"
#include "fnproc/numeric.hpp"

namespace fnproc::ad {
namespace {

[[noreturn]] void shape_fail(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": shape mismatch " + a.str() + " vs " + b.str());
}

std::size_t arity(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf:
      return 0;
    case OpKind::kMatmul:
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
    case OpKind::kConcatCols:
    case OpKind::kAddRow:
    case OpKind::kMulScalar:
    case OpKind::kPairwiseSqdist:
      return 2;
    default:
      return 1;
  }
}

template <typename F>
Matrix map(const Matrix& x, F&& f) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

template <typename F>
Matrix zip(const Matrix& x, const Matrix& y, F&& f) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

void accumulate(std::optional<Matrix>& slot, Matrix g) {
  if (!slot) {
    slot = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i];
}

double log1mexp_value(double x) { return std::log(std::max(-std::expm1(-x), kLogFloor)); }

}  // namespace

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf:
      return "leaf";
    case OpKind::kMatmul:
      return "matmul";
    case OpKind::kAdd:
      return "add";
    case OpKind::kSub:
      return "sub";
    case OpKind::kMul:
      return "mul";
    case OpKind::kDiv:
      return "div";
    case OpKind::kRelu:
      return "relu";
    case OpKind::kSoftplus:
      return "softplus";
    case OpKind::kExp:
      return "exp";
    case OpKind::kLog:
      return "log";
    case OpKind::kSigmoid:
      return "sigmoid";
    case OpKind::kNeg:
      return "neg";
    case OpKind::kSum:
      return "sum";
    case OpKind::kMean:
      return "mean";
    case OpKind::kConcatCols:
      return "concat_cols";
    case OpKind::kAddRow:
      return "add_row";
    case OpKind::kTranspose:
      return "transpose";
    case OpKind::kScale:
      return "scale";
    case OpKind::kAddScalar:
      return "add_scalar";
    case OpKind::kMulScalar:
      return "mul_scalar";
    case OpKind::kClamp:
      return "clamp";
    case OpKind::kRowSum:
      return "row_sum";
    case OpKind::kColumnMean:
      return "column_mean";
    case OpKind::kPairwiseSqdist:
      return "pairwise_sqdist";
    case OpKind::kLog1mexp:
      return "log1mexp";
    case OpKind::kLogSoftmax:
      return "log_softmax";
  }
  return "unknown";
}

const Matrix& Tensor::value() const { return tape_->nodes_.at(id_).value; }

bool Tensor::requires_grad() const { return tape_->nodes_.at(id_).requires_grad; }

double Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("item: expected 1x1 tensor, got " + v.shape().str());
  return v[0];
}

const Matrix* Gradients::find(const Tensor& t) const {
  if (t.id() >= slots_.size() || !slots_[t.id()]) return nullptr;
  return &*slots_[t.id()];
}

const Matrix& Gradients::at(const Tensor& t) const {
  const Matrix* g = find(t);
  if (g == nullptr) throw std::out_of_range("no gradient recorded for node " + std::to_string(t.id()));
  return *g;
}

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tensor Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = mode_ == Mode::kRecord;
  return Tensor(this, push(std::move(n)));
}

Tensor Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return Tensor(this, push(std::move(n)));
}

Tensor Tape::apply(OpKind kind, std::span<const Tensor> inputs, OpAttrs attrs) {
  if (kind == OpKind::kLeaf) throw std::invalid_argument("apply: leaves are created with variable/constant");
  if (inputs.size() != arity(kind)) {
    throw std::invalid_argument(std::string(op_name(kind)) + ": expected " + std::to_string(arity(kind)) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
  for (const Tensor& t : inputs) {
    if (t.tape_ != this) throw std::invalid_argument(std::string(op_name(kind)) + ": input from another tape");
  }

  const Matrix& x = inputs[0].value();
  const Matrix* y = inputs.size() > 1 ? &inputs[1].value() : nullptr;
  Matrix out;

  switch (kind) {
    case OpKind::kMatmul:
      if (x.cols() != y->rows()) shape_fail(kind, x.shape(), y->shape());
      kernels::matmul(x, *y, out);
      break;
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
      if (x.shape() != y->shape()) shape_fail(kind, x.shape(), y->shape());
      if (kind == OpKind::kAdd) out = zip(x, *y, [](double a, double b) { return a + b; });
      if (kind == OpKind::kSub) out = zip(x, *y, [](double a, double b) { return a - b; });
      if (kind == OpKind::kMul) out = zip(x, *y, [](double a, double b) { return a * b; });
      if (kind == OpKind::kDiv) out = zip(x, *y, [](double a, double b) { return a / b; });
      break;
    case OpKind::kRelu:
      out = map(x, [](double v) { return v > 0.0 ? v : 0.0; });
      break;
    case OpKind::kSoftplus:
      out = map(x, softplus_value);
      break;
    case OpKind::kExp:
      out = map(x, [](double v) { return std::exp(v); });
      break;
    case OpKind::kLog:
      out = map(x, [](double v) { return std::log(std::max(v, kLogFloor)); });
      break;
    case OpKind::kSigmoid:
      out = map(x, sigmoid_value);
      break;
    case OpKind::kNeg:
      out = map(x, [](double v) { return -v; });
      break;
    case OpKind::kSum:
    case OpKind::kMean: {
      double s = 0.0;
      for (double v : x.values()) s += v;
      if (kind == OpKind::kMean && x.size() > 0) s /= static_cast<double>(x.size());
      out = Matrix::scalar(s);
      break;
    }
    case OpKind::kConcatCols:
      if (x.rows() != y->rows()) shape_fail(kind, x.shape(), y->shape());
      out = Matrix(x.rows(), x.cols() + y->cols());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        std::copy(x.row_span(r).begin(), x.row_span(r).end(), out.row_span(r).begin());
        std::copy(y->row_span(r).begin(), y->row_span(r).end(),
                  out.row_span(r).begin() + static_cast<std::ptrdiff_t>(x.cols()));
      }
      break;
    case OpKind::kAddRow:
      if (y->rows() != 1 || y->cols() != x.cols()) shape_fail(kind, x.shape(), y->shape());
      out = x;
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) += (*y)[c];
      break;
    case OpKind::kTranspose:
      out = Matrix(x.cols(), x.rows());
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
      break;
    case OpKind::kScale:
      out = map(x, [f = attrs.a](double v) { return v * f; });
      break;
    case OpKind::kAddScalar:
      out = map(x, [o = attrs.a](double v) { return v + o; });
      break;
    case OpKind::kMulScalar:
      if (y->size() != 1) shape_fail(kind, x.shape(), y->shape());
      out = map(x, [s = (*y)[0]](double v) { return v * s; });
      break;
    case OpKind::kClamp:
      out = map(x, [lo = attrs.a, hi = attrs.b](double v) { return std::clamp(v, lo, hi); });
      break;
    case OpKind::kRowSum:
      out = Matrix(x.rows(), 1);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double s = 0.0;
        for (double v : x.row_span(r)) s += v;
        out(r, 0) = s;
      }
      break;
    case OpKind::kColumnMean: {
      if (x.rows() == 0) throw ShapeError("column_mean: empty input " + x.shape().str());
      out = Matrix(1, x.cols());
      std::vector<double> column(x.rows());
      for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x(r, c);
        out[c] = exact_sum(column) / static_cast<double>(x.rows());
      }
      break;
    }
    case OpKind::kPairwiseSqdist:
      if (x.cols() != y->cols()) shape_fail(kind, x.shape(), y->shape());
      kernels::pairwise_sqdist(x, *y, out);
      break;
    case OpKind::kLog1mexp:
      out = map(x, log1mexp_value);
      break;
    case OpKind::kLogSoftmax:
      kernels::log_softmax_rows(x, out);
      break;
    case OpKind::kLeaf:
      break;
  }

  Node n;
  n.kind = kind;
  n.value = std::move(out);
  n.attrs = attrs;
  if (mode_ == Mode::kRecord) {
    for (const Tensor& t : inputs) {
      n.parents.push_back(t.id_);
      n.requires_grad = n.requires_grad || nodes_[t.id_].requires_grad;
    }
  }
  return Tensor(this, push(std::move(n)));
}

Gradients Tape::backward(const Tensor& loss) const {
  if (loss.tape_ != this) throw std::invalid_argument("backward: loss from another tape");
  const Matrix& lv = nodes_.at(loss.id_).value;
  if (lv.size() != 1) throw ShapeError("backward: loss must be 1x1, got " + lv.shape().str());

  Gradients out;
  auto& slots = out.slots_;
  slots.resize(nodes_.size());
  if (!nodes_[loss.id_].requires_grad) return out;
  slots[loss.id_] = Matrix::scalar(1.0);

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    if (!slots[i] || !nodes_[i].requires_grad) continue;
    if (nodes_[i].kind == OpKind::kLeaf) continue;
    backprop_node(nodes_[i], *slots[i], slots);
  }
  // Interior gradients are kept; callers typically read leaves only.
  return out;
}

void Tape::backprop_node(const Node& node, const Matrix& g, std::vector<std::optional<Matrix>>& slots) const {
  const auto& p = node.parents;
  const Node& a = nodes_[p[0]];
  const Node* b = p.size() > 1 ? &nodes_[p[1]] : nullptr;
  const Matrix& x = a.value;
  const Matrix& yv = node.value;
  auto want = [&](std::size_t k) { return nodes_[p[k]].requires_grad; };

  switch (node.kind) {
    case OpKind::kMatmul: {
      if (want(0)) {
        Matrix ga;
        kernels::matmul_nt(g, b->value, ga);
        accumulate(slots[p[0]], std::move(ga));
      }
      if (want(1)) {
        Matrix gb;
        kernels::matmul_tn(x, g, gb);
        accumulate(slots[p[1]], std::move(gb));
      }
      break;
    }
    case OpKind::kAdd:
      if (want(0)) accumulate(slots[p[0]], g);
      if (want(1)) accumulate(slots[p[1]], g);
      break;
    case OpKind::kSub:
      if (want(0)) accumulate(slots[p[0]], g);
      if (want(1)) accumulate(slots[p[1]], map(g, [](double v) { return -v; }));
      break;
    case OpKind::kMul:
      if (want(0)) accumulate(slots[p[0]], zip(g, b->value, [](double u, double v) { return u * v; }));
      if (want(1)) accumulate(slots[p[1]], zip(g, x, [](double u, double v) { return u * v; }));
      break;
    case OpKind::kDiv: {
      const Matrix& den = b->value;
      if (want(0)) accumulate(slots[p[0]], zip(g, den, [](double u, double v) { return u / v; }));
      if (want(1)) {
        Matrix gb(den.rows(), den.cols());
        for (std::size_t i = 0; i < den.size(); ++i) gb[i] = -g[i] * yv[i] / den[i];
        accumulate(slots[p[1]], std::move(gb));
      }
      break;
    }
    case OpKind::kRelu:
      accumulate(slots[p[0]], zip(g, x, [](double u, double v) { return v > 0.0 ? u : 0.0; }));
      break;
    case OpKind::kSoftplus:
      accumulate(slots[p[0]], zip(g, x, [](double u, double v) { return u * sigmoid_value(v); }));
      break;
    case OpKind::kExp:
      accumulate(slots[p[0]], zip(g, yv, [](double u, double v) { return u * v; }));
      break;
    case OpKind::kLog:
      accumulate(slots[p[0]], zip(g, x, [](double u, double v) { return v > kLogFloor ? u / v : 0.0; }));
      break;
    case OpKind::kSigmoid:
      accumulate(slots[p[0]], zip(g, yv, [](double u, double s) { return u * s * (1.0 - s); }));
      break;
    case OpKind::kNeg:
      accumulate(slots[p[0]], map(g, [](double v) { return -v; }));
      break;
    case OpKind::kSum:
      accumulate(slots[p[0]], Matrix(x.rows(), x.cols(), g[0]));
      break;
    case OpKind::kMean:
      accumulate(slots[p[0]], Matrix(x.rows(), x.cols(), g[0] / static_cast<double>(x.size())));
      break;
    case OpKind::kConcatCols: {
      const std::size_t ca = x.cols();
      const std::size_t cb = b->value.cols();
      if (want(0)) {
        Matrix ga(x.rows(), ca);
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < ca; ++c) ga(r, c) = g(r, c);
        accumulate(slots[p[0]], std::move(ga));
      }
      if (want(1)) {
        Matrix gb(x.rows(), cb);
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < cb; ++c) gb(r, c) = g(r, ca + c);
        accumulate(slots[p[1]], std::move(gb));
      }
      break;
    }
    case OpKind::kAddRow:
      if (want(0)) accumulate(slots[p[0]], g);
      if (want(1)) {
        Matrix gr(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
        accumulate(slots[p[1]], std::move(gr));
      }
      break;
    case OpKind::kTranspose: {
      Matrix gt(g.cols(), g.rows());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gt(c, r) = g(r, c);
      accumulate(slots[p[0]], std::move(gt));
      break;
    }
    case OpKind::kScale:
      accumulate(slots[p[0]], map(g, [f = node.attrs.a](double v) { return v * f; }));
      break;
    case OpKind::kAddScalar:
      accumulate(slots[p[0]], g);
      break;
    case OpKind::kMulScalar: {
      const double s = b->value[0];
      if (want(0)) accumulate(slots[p[0]], map(g, [s](double v) { return v * s; }));
      if (want(1)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
        accumulate(slots[p[1]], Matrix::scalar(acc));
      }
      break;
    }
    case OpKind::kClamp:
      accumulate(slots[p[0]], zip(g, x, [lo = node.attrs.a, hi = node.attrs.b](double u, double v) {
                   return (v >= lo && v <= hi) ? u : 0.0;
                 }));
      break;
    case OpKind::kRowSum: {
      Matrix gx(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) gx(r, c) = g(r, 0);
      accumulate(slots[p[0]], std::move(gx));
      break;
    }
    case OpKind::kColumnMean: {
      Matrix gx(x.rows(), x.cols());
      const double inv = 1.0 / static_cast<double>(x.rows());
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) gx(r, c) = g[c] * inv;
      accumulate(slots[p[0]], std::move(gx));
      break;
    }
    case OpKind::kPairwiseSqdist: {
      // d/da_i = 2 sum_j g_ij (a_i - b_j); d/db_j = -2 sum_i g_ij (a_i - b_j).
      const Matrix& bv = b->value;
      if (want(0)) {
        Matrix gb_term;
        kernels::matmul(g, bv, gb_term);
        Matrix ga(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double rs = 0.0;
          for (double v : g.row_span(i)) rs += v;
          for (std::size_t k = 0; k < x.cols(); ++k) ga(i, k) = 2.0 * (rs * x(i, k) - gb_term(i, k));
        }
        accumulate(slots[p[0]], std::move(ga));
      }
      if (want(1)) {
        Matrix ga_term;
        kernels::matmul_tn(g, x, ga_term);
        std::vector<double> cs(bv.rows(), 0.0);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) cs[j] += g(i, j);
        Matrix gb(bv.rows(), bv.cols());
        for (std::size_t j = 0; j < bv.rows(); ++j)
          for (std::size_t k = 0; k < bv.cols(); ++k) gb(j, k) = 2.0 * (cs[j] * bv(j, k) - ga_term(j, k));
        accumulate(slots[p[1]], std::move(gb));
      }
      break;
    }
    case OpKind::kLog1mexp:
      accumulate(slots[p[0]], zip(g, x, [](double u, double v) {
                   const double one_minus = -std::expm1(-v);
                   return one_minus > kLogFloor ? u / std::expm1(v) : 0.0;
                 }));
      break;
    case OpKind::kLogSoftmax: {
      Matrix gx(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double gs = 0.0;
        for (double v : g.row_span(r)) gs += v;
        for (std::size_t c = 0; c < x.cols(); ++c) gx(r, c) = g(r, c) - std::exp(yv(r, c)) * gs;
      }
      accumulate(slots[p[0]], std::move(gx));
      break;
    }
    case OpKind::kLeaf:
      break;
  }
}

namespace {
Tensor apply1(OpKind k, const Tensor& x, OpAttrs attrs = {}) {
  const Tensor in[] = {x};
  return x.tape()->apply(k, in, attrs);
}
Tensor apply2(OpKind k, const Tensor& x, const Tensor& y) {
  const Tensor in[] = {x, y};
  return x.tape()->apply(k, in);
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return apply2(OpKind::kMatmul, a, b); }
Tensor add(const Tensor& a, const Tensor& b) { return apply2(OpKind::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return apply2(OpKind::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return apply2(OpKind::kMul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return apply2(OpKind::kDiv, a, b); }
Tensor relu(const Tensor& x) { return apply1(OpKind::kRelu, x); }
Tensor softplus(const Tensor& x) { return apply1(OpKind::kSoftplus, x); }
Tensor exp(const Tensor& x) { return apply1(OpKind::kExp, x); }
Tensor log(const Tensor& x) { return apply1(OpKind::kLog, x); }
Tensor sigmoid(const Tensor& x) { return apply1(OpKind::kSigmoid, x); }
Tensor neg(const Tensor& x) { return apply1(OpKind::kNeg, x); }
Tensor sum(const Tensor& x) { return apply1(OpKind::kSum, x); }
Tensor mean(const Tensor& x) { return apply1(OpKind::kMean, x); }
Tensor concat_cols(const Tensor& a, const Tensor& b) { return apply2(OpKind::kConcatCols, a, b); }
Tensor add_row(const Tensor& m, const Tensor& row) { return apply2(OpKind::kAddRow, m, row); }
Tensor transpose(const Tensor& x) { return apply1(OpKind::kTranspose, x); }
Tensor scale(const Tensor& x, double factor) { return apply1(OpKind::kScale, x, {factor, 0.0}); }
Tensor add_scalar(const Tensor& x, double offset) { return apply1(OpKind::kAddScalar, x, {offset, 0.0}); }
Tensor mul_scalar(const Tensor& x, const Tensor& s) { return apply2(OpKind::kMulScalar, x, s); }
Tensor clamp(const Tensor& x, double lo, double hi) { return apply1(OpKind::kClamp, x, {lo, hi}); }
Tensor row_sum(const Tensor& x) { return apply1(OpKind::kRowSum, x); }
Tensor column_mean(const Tensor& x) { return apply1(OpKind::kColumnMean, x); }
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) { return apply2(OpKind::kPairwiseSqdist, a, b); }
Tensor log1mexp(const Tensor& x) { return apply1(OpKind::kLog1mexp, x); }
Tensor log_softmax(const Tensor& x) { return apply1(OpKind::kLogSoftmax, x); }

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace fnproc::ad
