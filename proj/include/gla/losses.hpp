#pragma once

// Scalar objectives, all built from autodiff primitives so they differentiate
// end to end. Batch size M is the number of rows.

#include <span>

#include "gla/autodiff.hpp"

namespace gla::losses {

using ad::Var;

struct LossWeights {
  double alpha = 0.01;   // KL-to-prior weight
  double beta = 10.0;    // distribution alignment weight
  double kappa = 0.05;   // feature-norm trade-off
  double delta_r = 1.0;  // feature-norm enlargement step

  /// Throws std::invalid_argument if any weight is negative or non-finite.
  void validate() const;
};

/// mean_i −log softmax(logits_i)[label_i]
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

/// Closed-form KL between the batch-fitted diagonal Gaussian of `z` and N(0, I):
/// Σ_d ½(μ_d² + σ_d² − ln σ_d² − 1), σ_d² the biased batch variance plus
/// `variance_floor`.
Var kld_to_prior(Var z, double variance_floor = 1e-8);

/// mean_i ‖a_i − b_i‖₁ with rows paired by index (target decodes vs decoded
/// prior draws).
Var dal(Var target_recon, Var prior_recon);

/// mean_i −Σ_c p_ic log p_ic with p = softmax(logits).
Var entropy_loss(Var logits);

/// Mean over batch and classes of |p1 − p2| for probability rows.
Var mcd_discrepancy(Var p1, Var p2);

/// mean_i ‖x̂_i − x_i‖₁ against the reconstruction's own input.
Var recon(Var reconstruction, Var input);

/// KL(N(μ_t, σ_t²) ‖ N(μ_s, σ_s²)) summed over dimensions for batch-fitted
/// diagonal Gaussians. With `variance_floor` == 0 a variance below 1e-12 is
/// an error; otherwise the floor is added to both variances.
Var kld_direct(Var z_source, Var z_target, double variance_floor = 0.0);

/// dal between source and target reconstructions.
Var dal_direct(Var source_recon, Var target_recon);

/// Row-wise L2 norms of a feature batch, M×1.
Var feature_norms(Var features);

/// mean_i (h_curr_i − (h_prev_i + δr))². `h_prev` is detached: it enters as a
/// constant and never receives gradient.
Var safn_feature_norm(Var h_prev, Var h_curr, double delta_r);

}  // namespace gla::losses
