#include "gla/optimizer.hpp"

#include <cmath>

namespace gla::train {

OptimizerKind optimizer_from_name(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

Optimizer::Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer: lr must be > 0");
}

void Optimizer::step(model::Parameter& p, const Tensor& grad) {
  require_same_shape(p.value, grad, ("optimizer_step " + p.name).c_str());
  Slot& s = slots_[&p];
  ++s.t;
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < grad.size(); ++i) p.value[i] -= lr_ * grad[i];
    return;
  }
  if (s.m.empty()) {
    s.m = Tensor::zeros_like(grad);
    s.v = Tensor::zeros_like(grad);
  }
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g;
    s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g * g;
    p.value[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + kEps);
  }
}

void Optimizer::step(std::span<model::Parameter* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer_step: params/grads count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) step(*params[i], grads[i]);
}

void Optimizer::step(model::BoundModel& bound, unsigned groups) {
  for (auto [p, g] : bound.model().parameters())
    if ((groups & g) && bound.trainable(g)) step(*p, bound.grad(*p));
}

std::size_t Optimizer::steps_taken(const model::Parameter& p) const {
  auto it = slots_.find(&p);
  return it == slots_.end() ? 0 : it->second.t;
}

}  // namespace gla::train
