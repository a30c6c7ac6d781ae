#pragma once

// Tape-based reverse-mode differentiation over dense 2D tensors.
//
// A Tape records primitive applications in execution order; `backward` walks
// them in exact reverse order and accumulates adjoints. A tensor used more
// than once (a tied weight read both directly and transposed) simply receives
// the sum of its path contributions.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gla/tensor.hpp"

namespace gla::ad {

enum class Op {
  kLeaf,
  kMatMul,            // A(m×k) · B(k×n)
  kMatMulTransposed,  // A(m×k) · W(n×k)ᵀ, W read in place
  kAddRowBias,        // X(m×n) + b(1×n) broadcast over rows
  kAdd,
  kSub,
  kMul,
  kDiv,
  kRelu,
  kLog,
  kExp,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kMeanAll,
  kSumAll,
  kAbs,
  kSquare,
  kSqrt,
  kBatchNormRows,
  kScale,      // c · X
  kAddScalar,  // X + c
  kRowSum,     // (m×n) -> (m×1)
  kColMean,    // (m×n) -> (1×n)
  kSubRow,     // X(m×n) − r(1×n) broadcast over rows
};

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

/// Running statistics for batch normalization over rows (one entry per column).
struct BatchNormStats {
  Tensor running_mean;  // 1×n
  Tensor running_var;   // 1×n
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t width = 0)
      : running_mean(1, width, 0.0), running_var(1, width, 1.0) {}
};

enum class BatchNormMode {
  kTrain,          // batch statistics, running statistics updated
  kTrainFrozen,    // batch statistics, running statistics untouched
  kEval,           // running statistics, a pure affine map
};

/// Extra arguments some primitives take; ignored by the rest.
struct OpArgs {
  double scalar = 0.0;
  BatchNormStats* bn_stats = nullptr;
  BatchNormMode bn_mode = BatchNormMode::kTrain;
};

class Tape;

/// Handle to a tensor recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Scalar value of a 1×1 variable.
  double item() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf owning its value.
  Var leaf(Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that reads caller-owned storage without copying; the storage must
  /// outlive the tape and stay unmodified until backward completes.
  Var param(const Tensor& storage, bool requires_grad = true);

  Var apply(Op op, std::span<const Var> inputs, const OpArgs& args = {});

  /// Reverse sweep from a 1×1 loss. Gradients are reset first.
  void backward(Var loss);

  /// Accumulated gradient of `v` after backward; zeros when unreached.
  const Tensor& grad(Var v) const;

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  Op op(int id) const { return nodes_.at(id).op; }
  std::span<const int> inputs(int id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Negative-control hook: the backward rule of `op` is deliberately wrong
  /// (its input adjoints are scaled by `factor`).
  void inject_gradient_fault(Op op, double factor = 1.5) {
    fault_op_ = op;
    fault_factor_ = factor;
  }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::array<int, 3> in{-1, -1, -1};
    int n_in = 0;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    double scalar = 0.0;
    bool bn_eval = false;
    Tensor saved;   // batchnorm: normalized input
    Tensor saved2;  // batchnorm: 1/sqrt(var + eps) per column
  };

  const Tensor& val(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  Tensor& grad_slot(int id);
  Var push(Node node);
  void backprop_node(int id);

  std::vector<Node> nodes_;
  Tensor empty_grad_;
  std::optional<Op> fault_op_;
  double fault_factor_ = 1.0;
};

// Typed wrappers over Tape::apply.
Var matmul(Var a, Var b);
Var matmul_transposed(Var a, Var w);
Var add_row_bias(Var x, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var relu(Var x);
Var log(Var x);
Var exp(Var x);
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);
Var mean_all(Var x);
Var sum_all(Var x);
Var abs(Var x);
Var square(Var x);
Var sqrt(Var x);
Var batchnorm_rows(Var x, Var gamma, Var beta, BatchNormStats* stats, BatchNormMode mode);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var row_sum(Var x);
Var col_mean(Var x);
Var sub_row(Var x, Var r);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var x) { return scale(x, c); }

}  // namespace gla::ad
