#include "gla/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gla::ad {

namespace {

double evaluate(const TensorFunction& f, const std::vector<Tensor>& at,
                const GradCheckOptions& opt) {
  Tape tape;
  if (opt.prepare_tape) opt.prepare_tape(tape);
  std::vector<Var> vars;
  vars.reserve(at.size());
  for (const auto& t : at) vars.push_back(tape.constant(t));
  const Var out = f(tape, vars);
  if (out.rows() != 1 || out.cols() != 1)
    throw ShapeError("finite_difference_check: function is not scalar");
  return out.item();
}

}  // namespace

GradCheckResult finite_difference_check(const TensorFunction& f, std::vector<Tensor> at,
                                        const GradCheckOptions& opt) {
  if (!(opt.step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be > 0");

  Tape tape;
  if (opt.prepare_tape) opt.prepare_tape(tape);
  std::vector<Var> vars;
  for (const auto& t : at) vars.push_back(tape.leaf(t));
  const Var out = f(tape, vars);
  if (out.rows() != 1 || out.cols() != 1)
    throw ShapeError("finite_difference_check: function is not scalar");
  std::vector<Tensor> analytic;
  if (out.requires_grad()) {
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  } else {
    for (const auto& t : at) analytic.push_back(Tensor::zeros_like(t));
  }

  GradCheckResult res;
  const double f0 = opt.excuse_nonsmooth ? evaluate(f, at, opt) : 0.0;
  bool first = true;
  for (std::size_t k = 0; k < at.size(); ++k) {
    for (std::size_t i = 0; i < at[k].size(); ++i) {
      const double x0 = at[k][i];
      at[k][i] = x0 + opt.step;
      const double fp = evaluate(f, at, opt);
      at[k][i] = x0 - opt.step;
      const double fm = evaluate(f, at, opt);
      at[k][i] = x0;
      const double num = (fp - fm) / (2.0 * opt.step);
      const double ana = analytic[k][i];
      const double denom = std::max({std::fabs(ana), std::fabs(num), opt.abs_floor});
      const double rel = std::fabs(ana - num) / denom;
      ++res.checked;
      if (opt.excuse_nonsmooth && rel > opt.tol) {
        const double asym = std::fabs((fp - f0) - (f0 - fm)) / opt.step;
        if (asym >= std::fabs(ana - num)) {
          ++res.excused;
          continue;
        }
      }
      if (first || rel > res.max_rel_error) {
        first = false;
        res.max_rel_error = rel;
        res.worst_input = k;
        res.worst_index = i;
        res.analytic = ana;
        res.numeric = num;
      }
    }
  }
  res.passed = res.max_rel_error <= opt.tol &&
               static_cast<double>(res.excused) <=
                   opt.max_excused_fraction * static_cast<double>(res.checked);
  return res;
}

GradCheckResult finite_difference_check(const std::function<Var(Tape&, Var)>& f, const Tensor& at,
                                        double step, double tol) {
  GradCheckOptions opt;
  opt.step = step;
  opt.tol = tol;
  return finite_difference_check(
      [&](Tape& t, std::span<const Var> v) { return f(t, v[0]); }, {at}, opt);
}

}  // namespace gla::ad
