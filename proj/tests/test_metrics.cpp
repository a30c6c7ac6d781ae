#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gla/metrics.hpp"
#include "gla/report.hpp"
#include "gla/rng.hpp"

using namespace gla;
using namespace gla::metrics;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Tensor scaled(const Tensor& t, double k) {
  Tensor out = t;
  for (auto& v : out.values()) v *= k;
  return out;
}

}  // namespace

TEST_CASE("accuracy and prediction") {
  const Tensor logits{{2.0, 1.0}, {0.0, 3.0}, {1.0, 1.0}};
  const std::vector<int> right{0, 1, 0}, wrong{1, 0, 1};
  CHECK(accuracy(logits, right) == 1.0);
  CHECK(accuracy(logits, wrong) == 0.0);
  CHECK(predict(logits) == std::vector<int>{0, 1, 0});  // tie → lowest index

  Rng rng = make_rng(1, 0);
  const Tensor noise = normal_tensor(rng, 10000, 2);
  std::vector<int> labels(10000);
  std::uniform_int_distribution<int> coin(0, 1);
  for (auto& l : labels) l = coin(rng);
  CHECK(std::fabs(accuracy(noise, labels) - 0.5) < 0.02);

  CHECK_THROWS_AS(accuracy(Tensor(0, 2), std::vector<int>{}), std::invalid_argument);
  CHECK_THROWS_AS(accuracy(logits, std::vector<int>{0, 1}), ShapeError);
  CHECK_THROWS_AS(accuracy(logits, std::vector<int>{0, 1, 2}), std::invalid_argument);
}

TEST_CASE("feature-space distance") {
  Rng rng = make_rng(2, 0);
  const Tensor z = normal_tensor(rng, 40, 6);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(i % 3);
  const auto same = feature_space_distance(z, labels, z, labels);
  CHECK(same.all == 0.0);
  for (double d : same.per_class) CHECK(d == 0.0);

  const Tensor e1{{1.0, 0.0}, {1.0, 0.0}}, e2{{0.0, 5.0}, {0.0, 5.0}};
  const std::vector<int> zeros{0, 0};
  const auto orth = feature_space_distance(e1, zeros, e2, zeros);
  CHECK(orth.all == doctest::Approx(std::sqrt(2.0)));
  CHECK(orth.per_class[0] == doctest::Approx(std::sqrt(2.0)));

  // Invariant to positive rescaling of every latent vector.
  const Tensor zt = normal_tensor(rng, 40, 6);
  const auto base = feature_space_distance(z, labels, zt, labels);
  const auto big = feature_space_distance(scaled(z, 7.5), labels, scaled(zt, 7.5), labels);
  CHECK(big.all == doctest::Approx(base.all).epsilon(1e-12));
  for (std::size_t c = 0; c < 3; ++c) CHECK(big.per_class[c] == doctest::Approx(base.per_class[c]).epsilon(1e-12));

  std::vector<int> missing(40, 0);
  CHECK_THROWS_AS(feature_space_distance(z, labels, zt, missing), std::invalid_argument);
  CHECK_THROWS_AS(feature_space_distance(z, labels, Tensor(40, 5), labels), ShapeError);
}

TEST_CASE("moment distance") {
  Rng rng = make_rng(3, 0);
  const Tensor a = normal_tensor(rng, 100, 2);
  const auto same = moment_distance(a, a);
  CHECK(same.mean_gap == 0.0);
  CHECK(same.cov_gap == 0.0);
  Tensor b = a;
  for (std::size_t i = 0; i < b.rows(); ++i) b(i, 0) += 1.0;
  const auto moved = moment_distance(b, a);
  CHECK(moved.mean_gap == doctest::Approx(1.0));
  CHECK(moved.cov_gap < 1e-12);

  // N(0, I) vs N((3,4), 4I): analytic gaps 5 and ‖3I‖_F = 3√2.
  const Tensor big_a = normal_tensor(rng, 20000, 2);
  const Tensor big_b = normal_tensor(rng, 20000, 2, 0.0, 2.0);
  Tensor shifted = big_b;
  for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, 0) += 3.0, shifted(i, 1) += 4.0;
  const auto g = moment_distance(big_a, shifted);
  CHECK(g.mean_gap == doctest::Approx(5.0).epsilon(0.01));
  CHECK(g.cov_gap == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(0.05));
  CHECK_THROWS_AS(moment_distance(Tensor(1, 2), a), std::invalid_argument);
}

TEST_CASE("energy distance") {
  Rng rng = make_rng(4, 0);
  const Tensor a = normal_tensor(rng, 60, 2), b = normal_tensor(rng, 50, 2, 1.0);
  CHECK(energy_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(energy_distance(a, b) == doctest::Approx(energy_distance(b, a)).epsilon(1e-12));
  CHECK(energy_distance(a, b) > 0.0);
  // Point masses at distance d: 2d.
  const Tensor p(5, 2), q(7, 2, 1.5);  // distance 1.5·√2
  CHECK(energy_distance(p, q) == doctest::Approx(2.0 * 1.5 * std::sqrt(2.0)));
  // Same multiset in another order.
  std::vector<std::size_t> rev(60);
  std::iota(rev.rbegin(), rev.rend(), 0);
  CHECK(energy_distance(a, a.rows_subset(rev)) == doctest::Approx(0.0).epsilon(1e-12));
  for (int rep = 0; rep < 20; ++rep)
    CHECK(energy_distance(normal_tensor(rng, 20, 2), normal_tensor(rng, 30, 2, 0.3)) >= 0.0);
}

TEST_CASE("histograms") {
  std::vector<double> constant(100, 0.3);
  const auto h = histogram(constant, 10, -1.0, 1.0);
  CHECK(std::count_if(h.counts.begin(), h.counts.end(), [](std::size_t c) { return c > 0; }) == 1);
  CHECK(h.total() == 100);

  Rng rng = make_rng(5, 0);
  const Tensor z = normal_tensor(rng, 100000, 1);
  const auto g = histogram(z.values(), 10, -4.0, 4.0);
  CHECK(g.total() == 100000);
  for (std::size_t i = 0; i < 10; ++i) {
    const double lo = -4.0 + 0.8 * static_cast<double>(i);
    CHECK(std::fabs(static_cast<double>(g.counts[i]) / 1e5 - (phi(lo + 0.8) - phi(lo))) < 0.01);
  }
  // Refinement conserves counts.
  const auto fine = histogram(z.values(), 80, -4.0, 4.0);
  CHECK(std::accumulate(fine.counts.begin(), fine.counts.end(), std::size_t{0}) ==
        std::accumulate(g.counts.begin(), g.counts.end(), std::size_t{0}));
  CHECK(fine.underflow == g.underflow);
  CHECK(fine.overflow == g.overflow);

  const std::vector<double> edges{-1.0, 1.0, 1.5, -2.0};
  const auto e = histogram(edges, 2, -1.0, 1.0);
  CHECK(e.counts[0] == 1);
  CHECK(e.counts[1] == 1);  // hi lands in the last bin
  CHECK(e.overflow == 1);
  CHECK(e.underflow == 1);
  CHECK_THROWS_AS(histogram(edges, 2, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(histogram(edges, 0, 0.0, 1.0), std::invalid_argument);

  const Tensor lat = normal_tensor(rng, 300, 8);
  const std::vector<std::size_t> dims{0, 3};
  const auto lh = latent_histogram(lat, 20, -4.0, 4.0, dims);
  CHECK(lh.per_dim.size() == 2);
  CHECK(lh.pooled.total() == 300 * 8);
  CHECK(lh.per_dim[1].total() == 300);
  const std::vector<std::size_t> bad{8};
  CHECK_THROWS_AS(latent_histogram(lat, 20, -4.0, 4.0, bad), std::invalid_argument);
}

TEST_CASE("prior-like fraction") {
  Rng rng = make_rng(6, 0);
  CHECK(prior_like_fraction(column_moments(normal_tensor(rng, 2000, 16))) == 1.0);
  Tensor mixed = normal_tensor(rng, 2000, 4);
  for (std::size_t i = 0; i < mixed.rows(); ++i) {
    mixed(i, 1) += 2.0;   // mean off
    mixed(i, 2) *= 3.0;   // variance 9
    mixed(i, 3) *= 0.1;   // variance 0.01
  }
  CHECK(prior_like_fraction(column_moments(mixed)) == doctest::Approx(0.25));
  const auto m = column_moments(Tensor{{1.0, 2.0}, {3.0, 2.0}});
  CHECK(m.mean == std::vector<double>{2.0, 2.0});
  CHECK(m.var == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(prior_like_fraction(ColumnMoments{}), std::invalid_argument);
}

TEST_CASE("run report") {
  RunReport r({"a", "b"});
  r.add_row({1.0, 2.0}, 0.1);
  r.add_row({3.0, 0.5}, 0.2);
  CHECK(r.epochs() == 2);
  CHECK(r.last("b") == 0.5);
  CHECK(r.column("a") == std::vector<double>{1.0, 3.0});
  CHECK_THROWS_AS(r.add_row({1.0}, 0.3), ShapeError);
  CHECK_THROWS_AS(r.add_row({1.0, NAN}, 0.3), NumericError);
  CHECK_THROWS_AS(r.last("c"), std::invalid_argument);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.333333333");
}
