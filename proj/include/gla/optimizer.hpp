#pragma once

#include <span>
#include <string>
#include <unordered_map>

#include "gla/model.hpp"

namespace gla::train {

enum class OptimizerKind { kAdam, kSgd };
OptimizerKind optimizer_from_name(const std::string& s);
std::string optimizer_name(OptimizerKind k);

/// Adam (β₁ 0.9, β₂ 0.999, ε 1e-8, bias-corrected) or plain SGD. State is kept
/// per parameter, so a tied weight has exactly one slot and one step counter.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr);

  void step(model::Parameter& p, const Tensor& grad);
  void step(std::span<model::Parameter* const> params, std::span<const Tensor> grads);
  /// Steps every parameter of the bound model whose group is in `groups`
  /// and trainable on that binding, with the gradients left by backward.
  void step(model::BoundModel& bound, unsigned groups);

  double lr() const noexcept { return lr_; }
  OptimizerKind kind() const noexcept { return kind_; }
  /// Number of updates applied to `p` so far.
  std::size_t steps_taken(const model::Parameter& p) const;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  struct Slot {
    Tensor m, v;
    std::size_t t = 0;
  };
  OptimizerKind kind_;
  double lr_;
  std::unordered_map<const model::Parameter*, Slot> slots_;
};

}  // namespace gla::train
