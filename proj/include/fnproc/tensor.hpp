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

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fnproc/matrix.hpp"

/// Reverse-mode automatic differentiation over dense 2-D tensors.
///
/// A Tape records every operation in creation order, so parents always
/// precede children and backward is a single reverse sweep. Tapes are meant
/// to live for one training step (or one forward evaluation) and then be
/// dropped. Broadcasting is limited to add_row and mul_scalar; every other
/// binary op requires identical shapes.
namespace fnproc::ad {

using NodeId = std::size_t;

enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kRelu,
  kSoftplus,
  kExp,
  kLog,
  kSigmoid,
  kNeg,
  kSum,
  kMean,
  kConcatCols,
  kAddRow,
  kTranspose,
  kScale,
  kAddScalar,
  kMulScalar,
  kClamp,
  kRowSum,
  kColumnMean,
  kPairwiseSqdist,
  kLog1mexp,
  kLogSoftmax,
};

const char* op_name(OpKind kind);

/// Floor applied to the argument of log (and log1mexp).
inline constexpr double kLogFloor = 1e-12;

/// Scalar attributes for ops that take them (scale factor, clamp bounds).
struct OpAttrs {
  double a = 0.0;
  double b = 0.0;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its Tape lives.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  NodeId id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  /// Value of a 1x1 tensor.
  double item() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Gradients produced by Tape::backward, indexed by node id.
class Gradients {
 public:
  /// Gradient of a requires-grad tensor; nullptr when it received none.
  const Matrix* find(const Tensor& t) const;
  const Matrix& at(const Tensor& t) const;

 private:
  friend class Tape;
  std::vector<std::optional<Matrix>> slots_;
};

class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient (unless the tape is in inference mode).
  Tensor variable(Matrix value);
  /// Leaf that never receives a gradient.
  Tensor constant(Matrix value);
  Tensor constant(double v) { return constant(Matrix::scalar(v)); }

  /// Records op-kind over inputs; throws ShapeError naming both shapes when
  /// inputs do not conform.
  Tensor apply(OpKind kind, std::span<const Tensor> inputs, OpAttrs attrs = {});

  /// Reverse sweep from a 1x1 loss. Gradients from fan-out are summed.
  Gradients backward(const Tensor& loss) const;

  std::size_t size() const { return nodes_.size(); }
  Mode mode() const { return mode_; }

 private:
  friend class Tensor;

  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<NodeId> parents;
    Matrix value;
    OpAttrs attrs;
    bool requires_grad = false;
  };

  NodeId push(Node node);
  void backprop_node(const Node& node, const Matrix& grad, std::vector<std::optional<Matrix>>& slots) const;

  Mode mode_;
  std::vector<Node> nodes_;
};

// Differentiable operations. All inputs must live on the same tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
/// max(x, 0) + log(1 + exp(-|x|))
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);
/// log(max(x, kLogFloor)); zero gradient below the floor.
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor neg(const Tensor& x);
/// Sum of all elements, 1x1.
Tensor sum(const Tensor& x);
/// Mean of all elements, 1x1.
Tensor mean(const Tensor& x);
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Adds the 1xn row to every row of the mxn matrix.
Tensor add_row(const Tensor& m, const Tensor& row);
Tensor transpose(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
/// Multiplies every element by the 1x1 tensor s.
Tensor mul_scalar(const Tensor& x, const Tensor& s);
/// Elementwise clamp; gradient passes where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);
/// mxn -> mx1 sums over each row.
Tensor row_sum(const Tensor& x);
/// mxn -> 1xn column means, summed with exact rounding so the result does
/// not depend on row order.
Tensor column_mean(const Tensor& x);
/// (mxd, nxd) -> mxn squared Euclidean distances.
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);
/// log(1 - exp(-x)) for x >= 0, floored like log.
Tensor log1mexp(const Tensor& x);
Tensor log_softmax(const Tensor& x);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double eps);

/// Numerically stable ln(1 + e^x).
double softplus_value(double x);
double sigmoid_value(double x);

}  // namespace fnproc::ad
