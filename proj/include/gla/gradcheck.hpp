#pragma once

#include <functional>
#include <vector>

#include "gla/autodiff.hpp"

namespace gla::ad {

/// Scalar-valued function of one or more tensors, built on the given tape.
using TensorFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  /// Entries skipped by `excuse_nonsmooth` (see below).
  std::size_t excused = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  double abs_floor = 1e-8;
  /// Optional hook applied to each fresh tape (e.g. fault injection).
  std::function<void(Tape&)> prepare_tape;
  /// A failing entry is excused when the one-sided slopes of its stencil
  /// disagree by at least the analytic/numeric gap, i.e. a ReLU or |·| kink
  /// lies within ±step and the central difference itself is unreliable there.
  /// A wrong gradient at a smooth point is never excused. Off by default.
  bool excuse_nonsmooth = false;
  /// With excuse_nonsmooth: fail outright if more than this fraction of
  /// entries needed excusing.
  double max_excused_fraction = 0.01;
};

/// Compares the tape gradient of `f` at `at` with central differences
/// (f(x + h·e_i) − f(x − h·e_i)) / 2h for every entry of every input.
/// Relative error per entry is |a − n| / max(|a|, |n|, abs_floor).
GradCheckResult finite_difference_check(const TensorFunction& f, std::vector<Tensor> at,
                                        const GradCheckOptions& opt = {});

/// Single-input convenience overload.
GradCheckResult finite_difference_check(const std::function<Var(Tape&, Var)>& f, const Tensor& at,
                                        double step, double tol);

}  // namespace gla::ad
