#pragma once

#include <span>
#include <vector>

#include "gla/tensor.hpp"

namespace gla::metrics {

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Tensor& logits, std::span<const int> labels);

/// Row-wise argmax, lowest index on ties.
std::vector<int> predict(const Tensor& logits);

struct FeatureDistance {
  std::vector<double> per_class;  // indexed by class id
  double all = 0.0;
};

/// Latent vectors are scaled to unit L2 norm; per class c the result is the
/// L2 distance between the source and target class-c centroids, and `all`
/// compares the overall centroids.
FeatureDistance feature_space_distance(const Tensor& z_source, std::span<const int> source_labels,
                                       const Tensor& z_target, std::span<const int> target_labels);

struct MomentGap {
  double mean_gap = 0.0;  // ‖μ_A − μ_B‖₂
  double cov_gap = 0.0;   // ‖Σ_A − Σ_B‖_F, unbiased covariances
};

MomentGap moment_distance(const Tensor& a, const Tensor& b);

/// 2·E‖a − b‖ − E‖a − a′‖ − E‖b − b′‖, averaged over all ordered pairs
/// (self pairs included), evaluated exactly.
double energy_distance(const Tensor& a, const Tensor& b);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  std::size_t total() const;
};

/// Fixed-range histogram; bin i covers [lo + i·w, lo + (i+1)·w), the last bin
/// also takes `hi`. Values outside go to underflow/overflow.
Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

struct LatentHistograms {
  std::vector<std::size_t> dims;
  std::vector<Histogram> per_dim;
  Histogram pooled;  // every value of every column
};

LatentHistograms latent_histogram(const Tensor& z, std::size_t bins, double lo, double hi,
                                  std::span<const std::size_t> dims = {});

struct ColumnMoments {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};

ColumnMoments column_moments(const Tensor& z);

/// Fraction of columns with |mean| < mean_bound and variance in [var_lo, var_hi]:
/// how close a latent batch looks to N(0, I), dimension by dimension.
double prior_like_fraction(const ColumnMoments& m, double mean_bound = 0.5, double var_lo = 0.25,
                           double var_hi = 4.0);

}  // namespace gla::metrics
