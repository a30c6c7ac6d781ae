#include "gla/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gla/kernels.hpp"

namespace gla::ad {

namespace {

struct OpInfo {
  Op op;
  std::string_view name;
  int arity;
};

constexpr OpInfo kOps[] = {
    {Op::kLeaf, "leaf", 0},
    {Op::kMatMul, "matmul", 2},
    {Op::kMatMulTransposed, "matmul_transposed", 2},
    {Op::kAddRowBias, "add_row_bias", 2},
    {Op::kAdd, "add", 2},
    {Op::kSub, "sub", 2},
    {Op::kMul, "mul", 2},
    {Op::kDiv, "div", 2},
    {Op::kRelu, "relu", 1},
    {Op::kLog, "log", 1},
    {Op::kExp, "exp", 1},
    {Op::kSoftmaxRows, "softmax_rows", 1},
    {Op::kLogSoftmaxRows, "log_softmax_rows", 1},
    {Op::kMeanAll, "mean_all", 1},
    {Op::kSumAll, "sum_all", 1},
    {Op::kAbs, "abs", 1},
    {Op::kSquare, "square", 1},
    {Op::kSqrt, "sqrt", 1},
    {Op::kBatchNormRows, "batchnorm_rows", 3},
    {Op::kScale, "scale", 1},
    {Op::kAddScalar, "add_scalar", 1},
    {Op::kRowSum, "row_sum", 1},
    {Op::kColMean, "col_mean", 1},
    {Op::kSubRow, "sub_row", 2},
};

const OpInfo& info(Op op) {
  for (const auto& i : kOps)
    if (i.op == op) return i;
  throw std::invalid_argument("unknown primitive kind");
}

std::string where(Op op) { return std::string(info(op).name); }

void require_row_vector(const Tensor& r, std::size_t cols, Op op) {
  if (r.rows() != 1 || r.cols() != cols)
    throw ShapeError(where(op) + ": expected 1x" + std::to_string(cols) + ", got " +
                     r.shape_str());
}

template <class F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor y(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(a[i], b[i]);
  return y;
}

Tensor softmax_forward(const Tensor& x, bool log_space) {
  Tensor y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += std::exp(in[c] - mx);
    const double log_z = std::log(z);
    for (std::size_t c = 0; c < in.size(); ++c)
      out[c] = log_space ? in[c] - mx - log_z : std::exp(in[c] - mx - log_z);
  }
  return y;
}

}  // namespace

std::string_view op_name(Op op) { return info(op).name; }

std::optional<Op> op_from_name(std::string_view name) {
  for (const auto& i : kOps)
    if (i.name == name) return i.op;
  return std::nullopt;
}

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::item() const {
  const Tensor& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("item: not a scalar: " + v.shape_str());
  return v[0];
}

const Tensor& Tape::value(int id) const { return val(id); }

std::span<const int> Tape::inputs(int id) const {
  const Node& n = nodes_.at(id);
  return {n.in.data(), static_cast<std::size_t>(n.n_in)};
}

Var Tape::push(Node node) {
  if (!node.external) node.value.require_finite(info(node.op).name.data());
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(const Tensor& storage, bool requires_grad) {
  storage.require_finite("param");
  Node n;
  n.external = &storage;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::apply(Op op, std::span<const Var> inputs, const OpArgs& args) {
  const OpInfo& oi = info(op);
  if (op == Op::kLeaf) throw std::invalid_argument("apply: leaf is not a primitive");
  if (static_cast<int>(inputs.size()) != oi.arity)
    throw std::invalid_argument(where(op) + ": expected " + std::to_string(oi.arity) +
                                " inputs");
  Node n;
  n.op = op;
  n.n_in = oi.arity;
  n.scalar = args.scalar;
  for (int i = 0; i < oi.arity; ++i) {
    if (&inputs[i].tape() != this) throw std::invalid_argument(where(op) + ": foreign tape");
    n.in[i] = inputs[i].id();
    n.requires_grad = n.requires_grad || nodes_[n.in[i]].requires_grad;
  }
  const Tensor& a = val(n.in[0]);
  const Tensor& b = oi.arity > 1 ? val(n.in[1]) : a;

  switch (op) {
    case Op::kMatMul: {
      if (a.cols() != b.rows())
        throw ShapeError("matmul: shape mismatch " + a.shape_str() + " · " + b.shape_str());
      n.value = Tensor(a.rows(), b.cols());
      kernels::gemm_nn({a.rows(), b.cols(), a.cols()}, a.data(), b.data(), n.value.data(),
                       false);
      break;
    }
    case Op::kMatMulTransposed: {
      if (a.cols() != b.cols())
        throw ShapeError("matmul_transposed: shape mismatch " + a.shape_str() + " · (" +
                         b.shape_str() + ")T");
      n.value = Tensor(a.rows(), b.rows());
      kernels::gemm_nt({a.rows(), b.rows(), a.cols()}, a.data(), b.data(), n.value.data(),
                       false);
      break;
    }
    case Op::kAddRowBias:
    case Op::kSubRow: {
      require_row_vector(b, a.cols(), op);
      const double sign = op == Op::kAddRowBias ? 1.0 : -1.0;
      n.value = a;
      for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = n.value.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) row[c] += sign * b[c];
      }
      break;
    }
    case Op::kAdd:
      require_same_shape(a, b, "add");
      n.value = zip(a, b, [](double x, double y) { return x + y; });
      break;
    case Op::kSub:
      require_same_shape(a, b, "sub");
      n.value = zip(a, b, [](double x, double y) { return x - y; });
      break;
    case Op::kMul:
      require_same_shape(a, b, "mul");
      n.value = zip(a, b, [](double x, double y) { return x * y; });
      break;
    case Op::kDiv:
      require_same_shape(a, b, "div");
      for (double v : b.values())
        if (v == 0.0) throw NumericError("div: division by zero");
      n.value = zip(a, b, [](double x, double y) { return x / y; });
      break;
    case Op::kRelu:
      n.value = map(a, [](double x) { return x > 0.0 ? x : 0.0; });
      break;
    case Op::kLog:
      for (double v : a.values())
        if (!(v > 0.0)) throw NumericError("log of non-positive value");
      n.value = map(a, [](double x) { return std::log(x); });
      break;
    case Op::kExp:
      n.value = map(a, [](double x) { return std::exp(x); });
      break;
    case Op::kSoftmaxRows:
    case Op::kLogSoftmaxRows:
      if (a.cols() == 0) throw ShapeError(where(op) + ": zero columns");
      n.value = softmax_forward(a, op == Op::kLogSoftmaxRows);
      break;
    case Op::kMeanAll:
    case Op::kSumAll: {
      if (a.empty()) throw ShapeError(where(op) + ": empty input");
      double s = 0.0;
      for (double v : a.values()) s += v;
      n.value = Tensor(1, 1, op == Op::kMeanAll ? s / static_cast<double>(a.size()) : s);
      break;
    }
    case Op::kAbs:
      n.value = map(a, [](double x) { return std::fabs(x); });
      break;
    case Op::kSquare:
      n.value = map(a, [](double x) { return x * x; });
      break;
    case Op::kSqrt:
      for (double v : a.values())
        if (v < 0.0) throw NumericError("sqrt of negative value");
      n.value = map(a, [](double x) { return std::sqrt(x); });
      break;
    case Op::kScale:
      n.value = map(a, [c = args.scalar](double x) { return c * x; });
      break;
    case Op::kAddScalar:
      n.value = map(a, [c = args.scalar](double x) { return x + c; });
      break;
    case Op::kRowSum: {
      n.value = Tensor(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (double v : a.row(r)) s += v;
        n.value[r] = s;
      }
      break;
    }
    case Op::kColMean: {
      if (a.rows() == 0) throw ShapeError("col_mean: empty input");
      n.value = Tensor(1, a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) n.value[c] += a(r, c);
      for (std::size_t c = 0; c < a.cols(); ++c) n.value[c] /= static_cast<double>(a.rows());
      break;
    }
    case Op::kBatchNormRows: {
      const Tensor& gamma = b;
      const Tensor& beta = val(n.in[2]);
      const std::size_t m = a.rows(), w = a.cols();
      require_row_vector(gamma, w, op);
      require_row_vector(beta, w, op);
      BatchNormStats* st = args.bn_stats;
      if (st) {
        require_row_vector(st->running_mean, w, op);
        require_row_vector(st->running_var, w, op);
      }
      const double eps = st ? st->eps : 1e-5;
      n.saved = Tensor(m, w);
      n.saved2 = Tensor(1, w);
      n.value = Tensor(m, w);
      n.bn_eval = args.bn_mode == BatchNormMode::kEval;
      if (n.bn_eval) {
        if (!st) throw std::invalid_argument("batchnorm_rows: eval mode needs running statistics");
        for (std::size_t c = 0; c < w; ++c)
          n.saved2[c] = 1.0 / std::sqrt(st->running_var[c] + eps);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c)
            n.saved(r, c) = (a(r, c) - st->running_mean[c]) * n.saved2[c];
      } else {
        if (m < 2) throw ShapeError("batchnorm_rows: train mode needs at least 2 rows");
        Tensor mean(1, w), var(1, w);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c) mean[c] += a(r, c);
        for (std::size_t c = 0; c < w; ++c) mean[c] /= static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c) {
            const double d = a(r, c) - mean[c];
            var[c] += d * d;
          }
        for (std::size_t c = 0; c < w; ++c) {
          var[c] /= static_cast<double>(m);
          n.saved2[c] = 1.0 / std::sqrt(var[c] + eps);
        }
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c) n.saved(r, c) = (a(r, c) - mean[c]) * n.saved2[c];
        if (st && args.bn_mode == BatchNormMode::kTrain) {
          const double unbias = static_cast<double>(m) / static_cast<double>(m - 1);
          for (std::size_t c = 0; c < w; ++c) {
            st->running_mean[c] = (1.0 - st->momentum) * st->running_mean[c] + st->momentum * mean[c];
            st->running_var[c] =
                (1.0 - st->momentum) * st->running_var[c] + st->momentum * var[c] * unbias;
          }
        }
      }
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) n.value(r, c) = gamma[c] * n.saved(r, c) + beta[c];
      break;
    }
    case Op::kLeaf:
      break;
  }
  return push(std::move(n));
}

Tensor& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !val(id).empty()) n.grad = Tensor::zeros_like(val(id));
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) {
    auto& self = const_cast<Tape&>(*this);
    self.empty_grad_ = Tensor::zeros_like(val(v.id()));
    return empty_grad_;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: foreign tape");
  const Tensor& lv = val(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ShapeError("backward: loss is not scalar (" + lv.shape_str() + ")");
  if (!nodes_[loss.id()].requires_grad)
    throw std::invalid_argument("backward: loss is disconnected from every differentiable leaf");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id())[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || n.op == Op::kLeaf) continue;
    backprop_node(id);
  }
  for (const auto& n : nodes_)
    if (!n.grad.empty()) n.grad.require_finite("backward");
}

void Tape::backprop_node(int id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const Tensor& y = val(id);
  const double fault = (fault_op_ && *fault_op_ == n.op) ? fault_factor_ : 1.0;
  auto wants = [&](int k) { return nodes_[n.in[k]].requires_grad; };
  auto acc = [&](int k, auto f) {
    if (!wants(k)) return;
    Tensor& gi = grad_slot(n.in[k]);
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += fault * f(i);
  };
  const Tensor& a = val(n.in[0]);
  const Tensor& b = n.n_in > 1 ? val(n.in[1]) : a;

  switch (n.op) {
    case Op::kMatMul: {
      // dA = G·Bᵀ, dB = Aᵀ·G
      if (wants(0)) {
        Tensor t(a.rows(), a.cols());
        kernels::gemm_nt({a.rows(), a.cols(), b.cols()}, g.data(), b.data(), t.data(), false);
        acc(0, [&](std::size_t i) { return t[i]; });
      }
      if (wants(1)) {
        Tensor t(b.rows(), b.cols());
        kernels::gemm_tn({b.rows(), b.cols(), a.rows()}, a.data(), g.data(), t.data(), false);
        acc(1, [&](std::size_t i) { return t[i]; });
      }
      break;
    }
    case Op::kMatMulTransposed: {
      // Y = A·Wᵀ: dA = G·W, dW = Gᵀ·A
      if (wants(0)) {
        Tensor t(a.rows(), a.cols());
        kernels::gemm_nn({a.rows(), a.cols(), b.rows()}, g.data(), b.data(), t.data(), false);
        acc(0, [&](std::size_t i) { return t[i]; });
      }
      if (wants(1)) {
        Tensor t(b.rows(), b.cols());
        kernels::gemm_tn({b.rows(), b.cols(), a.rows()}, g.data(), a.data(), t.data(), false);
        acc(1, [&](std::size_t i) { return t[i]; });
      }
      break;
    }
    case Op::kAddRowBias:
    case Op::kSubRow: {
      acc(0, [&](std::size_t i) { return g[i]; });
      if (wants(1)) {
        const double sign = n.op == Op::kAddRowBias ? 1.0 : -1.0;
        Tensor t(1, a.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) t[c] += g(r, c);
        acc(1, [&](std::size_t i) { return sign * t[i]; });
      }
      break;
    }
    case Op::kAdd:
      acc(0, [&](std::size_t i) { return g[i]; });
      acc(1, [&](std::size_t i) { return g[i]; });
      break;
    case Op::kSub:
      acc(0, [&](std::size_t i) { return g[i]; });
      acc(1, [&](std::size_t i) { return -g[i]; });
      break;
    case Op::kMul:
      acc(0, [&](std::size_t i) { return g[i] * b[i]; });
      acc(1, [&](std::size_t i) { return g[i] * a[i]; });
      break;
    case Op::kDiv:
      acc(0, [&](std::size_t i) { return g[i] / b[i]; });
      acc(1, [&](std::size_t i) { return -g[i] * a[i] / (b[i] * b[i]); });
      break;
    case Op::kRelu:
      acc(0, [&](std::size_t i) { return a[i] > 0.0 ? g[i] : 0.0; });
      break;
    case Op::kLog:
      acc(0, [&](std::size_t i) { return g[i] / a[i]; });
      break;
    case Op::kExp:
      acc(0, [&](std::size_t i) { return g[i] * y[i]; });
      break;
    case Op::kSoftmaxRows: {
      // dx = y ⊙ (g − Σ_c g_c y_c)
      Tensor t(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < a.cols(); ++c) t(r, c) = y(r, c) * (g(r, c) - dot);
      }
      acc(0, [&](std::size_t i) { return t[i]; });
      break;
    }
    case Op::kLogSoftmaxRows: {
      // dx = g − softmax · Σ_c g_c
      Tensor t(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) s += g(r, c);
        for (std::size_t c = 0; c < a.cols(); ++c) t(r, c) = g(r, c) - std::exp(y(r, c)) * s;
      }
      acc(0, [&](std::size_t i) { return t[i]; });
      break;
    }
    case Op::kMeanAll: {
      const double s = g[0] / static_cast<double>(a.size());
      acc(0, [&](std::size_t) { return s; });
      break;
    }
    case Op::kSumAll:
      acc(0, [&](std::size_t) { return g[0]; });
      break;
    case Op::kAbs:
      acc(0, [&](std::size_t i) {
        return a[i] > 0.0 ? g[i] : (a[i] < 0.0 ? -g[i] : 0.0);
      });
      break;
    case Op::kSquare:
      acc(0, [&](std::size_t i) { return 2.0 * a[i] * g[i]; });
      break;
    case Op::kSqrt:
      // Subgradient 0 at the origin keeps norms of all-zero rows finite.
      acc(0, [&](std::size_t i) { return y[i] > 0.0 ? g[i] / (2.0 * y[i]) : 0.0; });
      break;
    case Op::kScale:
      acc(0, [&](std::size_t i) { return n.scalar * g[i]; });
      break;
    case Op::kAddScalar:
      acc(0, [&](std::size_t i) { return g[i]; });
      break;
    case Op::kRowSum:
      acc(0, [&](std::size_t i) { return g[i / a.cols()]; });
      break;
    case Op::kColMean: {
      const double inv = 1.0 / static_cast<double>(a.rows());
      acc(0, [&](std::size_t i) { return g[i % a.cols()] * inv; });
      break;
    }
    case Op::kBatchNormRows: {
      const Tensor& gamma = b;
      const Tensor& xhat = n.saved;
      const Tensor& inv_std = n.saved2;
      const std::size_t m = a.rows(), w = a.cols();
      Tensor sum_g(1, w), sum_gx(1, w);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          sum_g[c] += g(r, c);
          sum_gx[c] += g(r, c) * xhat(r, c);
        }
      if (wants(0)) {
        Tensor t(m, w);
        if (!n.bn_eval) {
          const double inv_m = 1.0 / static_cast<double>(m);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c)
              t(r, c) = gamma[c] * inv_std[c] * inv_m *
                        (static_cast<double>(m) * g(r, c) - sum_g[c] - xhat(r, c) * sum_gx[c]);
        } else {
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c) t(r, c) = gamma[c] * inv_std[c] * g(r, c);
        }
        acc(0, [&](std::size_t i) { return t[i]; });
      }
      acc(1, [&](std::size_t i) { return sum_gx[i]; });
      acc(2, [&](std::size_t i) { return sum_g[i]; });
      break;
    }
    case Op::kLeaf:
      break;
  }
}

}  // namespace gla::ad

namespace gla::ad {

namespace {
Var unary(Op op, Var x, double c = 0.0) {
  const Var in[] = {x};
  return x.tape().apply(op, in, OpArgs{.scalar = c});
}
Var binary(Op op, Var a, Var b) {
  const Var in[] = {a, b};
  return a.tape().apply(op, in);
}
}  // namespace

Var matmul(Var a, Var b) { return binary(Op::kMatMul, a, b); }
Var matmul_transposed(Var a, Var w) { return binary(Op::kMatMulTransposed, a, w); }
Var add_row_bias(Var x, Var b) { return binary(Op::kAddRowBias, x, b); }
Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }
Var div(Var a, Var b) { return binary(Op::kDiv, a, b); }
Var relu(Var x) { return unary(Op::kRelu, x); }
Var log(Var x) { return unary(Op::kLog, x); }
Var exp(Var x) { return unary(Op::kExp, x); }
Var softmax_rows(Var x) { return unary(Op::kSoftmaxRows, x); }
Var log_softmax_rows(Var x) { return unary(Op::kLogSoftmaxRows, x); }
Var mean_all(Var x) { return unary(Op::kMeanAll, x); }
Var sum_all(Var x) { return unary(Op::kSumAll, x); }
Var abs(Var x) { return unary(Op::kAbs, x); }
Var square(Var x) { return unary(Op::kSquare, x); }
Var sqrt(Var x) { return unary(Op::kSqrt, x); }
Var scale(Var x, double c) { return unary(Op::kScale, x, c); }
Var add_scalar(Var x, double c) { return unary(Op::kAddScalar, x, c); }
Var row_sum(Var x) { return unary(Op::kRowSum, x); }
Var col_mean(Var x) { return unary(Op::kColMean, x); }
Var sub_row(Var x, Var r) { return binary(Op::kSubRow, x, r); }

Var batchnorm_rows(Var x, Var gamma, Var beta, BatchNormStats* stats, BatchNormMode mode) {
  const Var in[] = {x, gamma, beta};
  return x.tape().apply(Op::kBatchNormRows, in, OpArgs{.bn_stats = stats, .bn_mode = mode});
}

}  // namespace gla::ad
