#include "gla/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gla/kernels.hpp"

namespace gla::metrics {

std::vector<int> predict(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rows() == 0) throw std::invalid_argument("accuracy: empty batch");
  if (labels.size() != logits.rows()) throw ShapeError("accuracy: label count mismatch");
  const auto pred = predict(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols())
      throw std::invalid_argument("accuracy: label out of range");
    hit += pred[i] == labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

namespace {

std::vector<double> unit_centroid(const Tensor& z, std::span<const int> labels, int cls) {
  std::vector<double> c(z.cols(), 0.0);
  std::size_t n = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (cls >= 0 && labels[r] != cls) continue;
    double norm = 0.0;
    for (double v : z.row(r)) norm += v * v;
    norm = std::sqrt(norm);
    const double inv = norm > 0.0 ? 1.0 / norm : 0.0;
    for (std::size_t k = 0; k < z.cols(); ++k) c[k] += z(r, k) * inv;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("feature_space_distance: class absent in one domain");
  for (double& v : c) v /= static_cast<double>(n);
  return c;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

FeatureDistance feature_space_distance(const Tensor& z_source, std::span<const int> source_labels,
                                       const Tensor& z_target, std::span<const int> target_labels) {
  if (z_source.cols() != z_target.cols()) throw ShapeError("feature_space_distance: width mismatch");
  if (source_labels.size() != z_source.rows() || target_labels.size() != z_target.rows())
    throw ShapeError("feature_space_distance: label count mismatch");
  int classes = 0;
  for (int l : source_labels) classes = std::max(classes, l + 1);
  for (int l : target_labels) classes = std::max(classes, l + 1);
  FeatureDistance fd;
  for (int c = 0; c < classes; ++c)
    fd.per_class.push_back(
        l2(unit_centroid(z_source, source_labels, c), unit_centroid(z_target, target_labels, c)));
  fd.all = l2(unit_centroid(z_source, source_labels, -1), unit_centroid(z_target, target_labels, -1));
  return fd;
}

namespace {

void mean_cov(const Tensor& x, std::vector<double>& mu, std::vector<double>& cov) {
  const std::size_t n = x.rows(), d = x.cols();
  mu.assign(d, 0.0);
  cov.assign(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < d; ++k) mu[k] += x(r, k);
  for (double& v : mu) v /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += (x(r, i) - mu[i]) * (x(r, j) - mu[j]);
  for (double& v : cov) v /= static_cast<double>(n - 1);
}

}  // namespace

MomentGap moment_distance(const Tensor& a, const Tensor& b) {
  if (a.rows() < 2 || b.rows() < 2) throw std::invalid_argument("moment_distance: need >= 2 points");
  if (a.cols() != b.cols()) throw ShapeError("moment_distance: width mismatch");
  std::vector<double> ma, ca, mb, cb;
  mean_cov(a, ma, ca);
  mean_cov(b, mb, cb);
  return {l2(ma, mb), l2(ca, cb)};
}

double energy_distance(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw ShapeError("energy_distance: width mismatch");
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_distance: empty sample");
  const double na = static_cast<double>(a.rows()), nb = static_cast<double>(b.rows());
  const std::size_t d = a.cols();
  const double ab = kernels::pairwise_distance_sum(a.data(), a.rows(), b.data(), b.rows(), d);
  const double aa = kernels::pairwise_distance_sum(a.data(), a.rows(), a.data(), a.rows(), d);
  const double bb = kernels::pairwise_distance_sum(b.data(), b.rows(), b.data(), b.rows(), d);
  const double e = 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
  return std::max(e, 0.0);
}

std::size_t Histogram::total() const {
  std::size_t t = underflow + overflow;
  for (auto c : counts) t += c;
  return t;
}

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("histogram: lo must be < hi");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0), 0, 0};
  const double w = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v > hi) {
      ++h.overflow;
    } else {
      auto i = static_cast<std::size_t>((v - lo) / w);
      h.counts[std::min(i, bins - 1)]++;
    }
  }
  return h;
}

LatentHistograms latent_histogram(const Tensor& z, std::size_t bins, double lo, double hi,
                                  std::span<const std::size_t> dims) {
  LatentHistograms out;
  out.dims.assign(dims.begin(), dims.end());
  std::vector<double> col(z.rows());
  for (std::size_t d : dims) {
    if (d >= z.cols()) throw std::invalid_argument("latent_histogram: dimension out of range");
    for (std::size_t r = 0; r < z.rows(); ++r) col[r] = z(r, d);
    out.per_dim.push_back(histogram(col, bins, lo, hi));
  }
  out.pooled = histogram(z.values(), bins, lo, hi);
  return out;
}

ColumnMoments column_moments(const Tensor& z) {
  if (z.rows() == 0) throw std::invalid_argument("column_moments: empty batch");
  ColumnMoments m{std::vector<double>(z.cols(), 0.0), std::vector<double>(z.cols(), 0.0)};
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) m.mean[c] += z(r, c);
  for (double& v : m.mean) v /= static_cast<double>(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) m.var[c] += (z(r, c) - m.mean[c]) * (z(r, c) - m.mean[c]);
  for (double& v : m.var) v /= static_cast<double>(z.rows());
  return m;
}

double prior_like_fraction(const ColumnMoments& m, double mean_bound, double var_lo, double var_hi) {
  if (m.mean.empty() || m.mean.size() != m.var.size())
    throw std::invalid_argument("prior_like_fraction: empty or inconsistent moments");
  std::size_t ok = 0;
  for (std::size_t d = 0; d < m.mean.size(); ++d)
    if (std::fabs(m.mean[d]) < mean_bound && m.var[d] >= var_lo && m.var[d] <= var_hi) ++ok;
  return static_cast<double>(ok) / static_cast<double>(m.mean.size());
}

}  // namespace gla::metrics
