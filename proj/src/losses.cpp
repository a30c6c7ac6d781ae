#include "gla/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gla::losses {

using namespace gla::ad;

namespace {

struct Moments {
  Var mean;  // 1×D
  Var var;   // 1×D, biased
};

Moments batch_moments(Var z, const char* who) {
  if (z.rows() < 2) throw std::invalid_argument(std::string(who) + ": batch needs at least 2 rows");
  Var mu = col_mean(z);
  Var var = col_mean(square(sub_row(z, mu)));
  return {mu, var};
}

double inv_rows(Var v) { return 1.0 / static_cast<double>(v.rows()); }

}  // namespace

void LossWeights::validate() const {
  for (double w : {alpha, beta, kappa, delta_r})
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("loss weights must be finite and >= 0");
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const std::size_t m = logits.rows(), c = logits.cols();
  if (m == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  if (labels.size() != m) throw ShapeError("softmax_cross_entropy: label count mismatch");
  Tensor onehot(m, c);
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  Var picked = mul(logits.tape().constant(std::move(onehot)), log_softmax_rows(logits));
  return scale(sum_all(picked), -inv_rows(logits));
}

Var kld_to_prior(Var z, double variance_floor) {
  auto [mu, var] = batch_moments(z, "kld_to_prior");
  if (variance_floor > 0.0) var = add_scalar(var, variance_floor);
  Var terms = add_scalar(sub(add(square(mu), var), log(var)), -1.0);
  return scale(sum_all(terms), 0.5);
}

Var dal(Var target_recon, Var prior_recon) {
  require_same_shape(target_recon.value(), prior_recon.value(), "dal");
  return scale(sum_all(abs(sub(target_recon, prior_recon))), inv_rows(target_recon));
}

Var entropy_loss(Var logits) {
  if (logits.rows() == 0) throw std::invalid_argument("entropy_loss: empty batch");
  Var p = softmax_rows(logits);
  Var logp = log_softmax_rows(logits);
  return scale(sum_all(mul(p, logp)), -inv_rows(logits));
}

Var mcd_discrepancy(Var p1, Var p2) {
  require_same_shape(p1.value(), p2.value(), "mcd_discrepancy");
  return mean_all(abs(sub(p1, p2)));
}

Var recon(Var reconstruction, Var input) {
  require_same_shape(reconstruction.value(), input.value(), "recon");
  return scale(sum_all(abs(sub(reconstruction, input))), inv_rows(input));
}

Var kld_direct(Var z_source, Var z_target, double variance_floor) {
  require_same_shape(z_source.value(), z_target.value(), "kld_direct");
  auto [mu_s, var_s] = batch_moments(z_source, "kld_direct");
  auto [mu_t, var_t] = batch_moments(z_target, "kld_direct");
  if (variance_floor > 0.0) {
    var_s = add_scalar(var_s, variance_floor);
    var_t = add_scalar(var_t, variance_floor);
  } else {
    for (const Var& v : {var_s, var_t})
      for (double x : v.value().values())
        if (x < 1e-12) throw NumericError("kld_direct: degenerate variance");
  }
  // ½ ln σ_s² − ½ ln σ_t² + (σ_t² + (μ_t − μ_s)²) / (2σ_s²) − ½
  Var log_ratio = scale(sub(log(var_s), log(var_t)), 0.5);
  Var quad = scale(div(add(var_t, square(sub(mu_t, mu_s))), var_s), 0.5);
  return sum_all(add_scalar(add(log_ratio, quad), -0.5));
}

Var dal_direct(Var source_recon, Var target_recon) {
  require_same_shape(source_recon.value(), target_recon.value(), "dal_direct");
  return dal(source_recon, target_recon);
}

Var feature_norms(Var features) { return ad::sqrt(row_sum(square(features))); }

Var safn_feature_norm(Var h_prev, Var h_curr, double delta_r) {
  require_same_shape(h_prev.value(), h_curr.value(), "safn_feature_norm");
  Tensor target = h_prev.value();
  for (double& v : target.values()) v += delta_r;
  Var fixed = h_curr.tape().constant(std::move(target));
  return mean_all(square(sub(h_curr, fixed)));
}

}  // namespace gla::losses
