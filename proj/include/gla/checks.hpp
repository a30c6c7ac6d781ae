#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gla/autodiff.hpp"

namespace gla::checks {

struct LossCheck {
  std::string name;
  std::size_t seeds = 0;
  std::size_t passed = 0;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::size_t excused = 0;  // kink-straddling stencils (composite only)
  bool ok() const { return passed == seeds; }
};

struct SuiteOptions {
  std::size_t seeds = 20;
  std::size_t batch = 4;
  double step = 1e-5;
  double tol = 1e-4;
  /// Negative control: scale every backward of this primitive by 1.5.
  std::optional<ad::Op> fault;
};

/// Central-difference checks for every loss on randomized batches, plus the
/// full DFA-ENT objective differentiated through the model w.r.t. a
/// representative parameter subset (including the tied first-layer weight).
std::vector<LossCheck> run_gradcheck_suite(const SuiteOptions& opt = {});

}  // namespace gla::checks
