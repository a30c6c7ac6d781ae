#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "gla/datasets.hpp"
#include "gla/rng.hpp"

using namespace gla;
using namespace gla::data;

namespace {

struct Moments {
  double mx = 0, my = 0, cxx = 0, cxy = 0, cyy = 0;
};

Moments moments(const Tensor& p) {
  Moments m;
  const double n = static_cast<double>(p.rows());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    m.mx += p(i, 0);
    m.my += p(i, 1);
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double dx = p(i, 0) - m.mx, dy = p(i, 1) - m.my;
    m.cxx += dx * dx;
    m.cxy += dx * dy;
    m.cyy += dy * dy;
  }
  m.cxx /= n - 1;
  m.cxy /= n - 1;
  m.cyy /= n - 1;
  return m;
}

double cov_frobenius(const Moments& m, const Cov2& c) {
  return std::sqrt((m.cxx - c.xx) * (m.cxx - c.xx) + 2 * (m.cxy - c.xy) * (m.cxy - c.xy) +
                   (m.cyy - c.yy) * (m.cyy - c.yy));
}

}  // namespace

TEST_CASE("gen_gaussian2d matches its parameters") {
  const Cov2 wide{4.0, 2.0, 2.0};
  const auto m = moments(gen_gaussian2d({5.0, 5.0}, wide, 500, 0));
  CHECK(std::fabs(m.mx - 5.0) < 0.3);
  CHECK(std::fabs(m.my - 5.0) < 0.3);
  CHECK(cov_frobenius(m, wide) < 0.8);

  const Cov2 narrow{0.3, 0.2, 0.2};
  const auto n = moments(gen_gaussian2d({1.0, 1.0}, narrow, 500, 0));
  CHECK(std::fabs(n.mx - 1.0) < 0.3);
  CHECK(std::fabs(n.my - 1.0) < 0.3);
  CHECK(cov_frobenius(n, narrow) < 0.8);
}

TEST_CASE("gen_gaussian2d with identity covariance returns the raw normal draw") {
  const Tensor p = gen_gaussian2d({0.0, 0.0}, {}, 1, 17);
  Rng rng = make_rng(17, Stream::kData);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double u = nd(rng), v = nd(rng);
  CHECK(p(0, 0) == u);
  CHECK(p(0, 1) == v);
}

TEST_CASE("gen_gaussian2d rejects bad arguments") {
  CHECK_THROWS_AS(gen_gaussian2d({0, 0}, {1.0, 2.0, 1.0}, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_gaussian2d({0, 0}, {-1.0, 0.0, 1.0}, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_gaussian2d({0, 0}, {}, 0, 0), std::invalid_argument);
}

TEST_CASE("sample covariance converges with n (majority of 20 seeds)") {
  const Cov2 c{4.0, 2.0, 2.0};
  int better = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double small = cov_frobenius(moments(gen_gaussian2d({5, 5}, c, 500, s)), c);
    const double large = cov_frobenius(moments(gen_gaussian2d({5, 5}, c, 50000, s)), c);
    better += large < small ? 1 : 0;
  }
  CHECK(better > 10);
}

TEST_CASE("noise-free moons lie on their circles") {
  const auto lp = gen_moons(200, 0.0, 3);
  int zeros = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double x = lp.points(i, 0), y = lp.points(i, 1);
    if (lp.labels[i] == 0) {
      ++zeros;
      CHECK(std::hypot(x, y) == doctest::Approx(1.0).epsilon(1e-14));
    } else {
      CHECK(std::hypot(x - 1.0, y - 0.5) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  CHECK(zeros == 100);
  CHECK(lp.labels.front() == 0);
  CHECK(lp.labels.back() == 1);
}

TEST_CASE("noisy moons keep their class means") {
  const auto clean = gen_moons(500, 0.0, 0);
  const auto noisy = gen_moons(500, 0.1, 0);
  for (int c = 0; c < 2; ++c) {
    double cx = 0, cy = 0, nx = 0, ny = 0, k = 0;
    for (std::size_t i = 0; i < 500; ++i) {
      if (clean.labels[i] != c) continue;
      cx += clean.points(i, 0);
      cy += clean.points(i, 1);
      nx += noisy.points(i, 0);
      ny += noisy.points(i, 1);
      ++k;
    }
    CHECK(std::fabs(nx / k - cx / k) < 0.05);
    CHECK(std::fabs(ny / k - cy / k) < 0.05);
  }
  CHECK_THROWS_AS(gen_moons(500, -0.1, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_moons(1, 0.1, 0), std::invalid_argument);
}

TEST_CASE("blobs") {
  const Vec2 centers[] = {{11.0, 11.0}, {9.0, 9.0}};
  const auto lp = gen_blobs(centers, 1.0, 500, 0);
  for (int c = 0; c < 2; ++c) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < 500; ++i) {
      const std::size_t r = c * 500 + i;
      CHECK(lp.labels[r] == c);
      mx += lp.points(r, 0);
      my += lp.points(r, 1);
    }
    CHECK(std::fabs(mx / 500 - centers[c][0]) < 0.2);
    CHECK(std::fabs(my / 500 - centers[c][1]) < 0.2);
  }

  const auto tight = gen_blobs(centers, 1e-9, 20, 1);
  for (std::size_t r = 0; r < 40; ++r) {
    CHECK(std::fabs(tight.points(r, 0) - centers[r / 20][0]) < 1e-6);
    CHECK(std::fabs(tight.points(r, 1) - centers[r / 20][1]) < 1e-6);
  }

  const Vec2 one[] = {{0.0, 0.0}};
  for (int l : gen_blobs(one, 1.0, 30, 2).labels) CHECK(l == 0);
  CHECK_THROWS_AS(gen_blobs(std::span<const Vec2>{}, 1.0, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_blobs(one, 0.0, 10, 0), std::invalid_argument);
}

TEST_CASE("generators are bit-identical per seed") {
  CHECK(bitwise_equal(gen_gaussian2d({1, 2}, {2, 0.5, 1}, 100, 9), gen_gaussian2d({1, 2}, {2, 0.5, 1}, 100, 9)));
  CHECK_FALSE(bitwise_equal(gen_gaussian2d({1, 2}, {2, 0.5, 1}, 100, 9), gen_gaussian2d({1, 2}, {2, 0.5, 1}, 100, 10)));
  CHECK(bitwise_equal(gen_moons(100, 0.1, 4).points, gen_moons(100, 0.1, 4).points));
  for (auto kind : {TaskKind::kGauss, TaskKind::kMoons, TaskKind::kBlobs}) {
    const Shift s{30.0, {0.5, -0.5}, 1.2, std::nullopt};
    const auto a = make_shifted_task(kind, s, 200, 5), b = make_shifted_task(kind, s, 200, 5);
    CHECK(bitwise_equal(a.source_points(), b.source_points()));
    CHECK(bitwise_equal(a.target_points(), b.target_points()));
    CHECK(a.target_labels_for_evaluation() == b.target_labels_for_evaluation());
    CHECK(a.provenance() == b.provenance());
  }
  for (auto p : {SyntheticPreset::kGaussSameCov, SyntheticPreset::kGaussSameMean, SyntheticPreset::kMoons,
                 SyntheticPreset::kBlobs}) {
    const auto a = make_synthetic_preset(p, 500, 1), b = make_synthetic_preset(p, 500, 1);
    CHECK(a.source_points().rows() == 500);
    CHECK(a.target_points().rows() == 500);
    CHECK(bitwise_equal(a.source_points(), b.source_points()));
    CHECK(bitwise_equal(a.target_points(), b.target_points()));
    CHECK(a.source_points().all_finite());
    CHECK(synthetic_preset_from_name(synthetic_preset_name(p)) == p);
  }
}

TEST_CASE("shifted task: structure and transform") {
  const auto id = make_shifted_task(TaskKind::kMoons, Shift{}, 500, 0);
  CHECK(id.num_classes() == 2);
  CHECK(id.source_labels().size() == 500);
  CHECK(id.target_labels_for_evaluation().size() == 500);
  // Source and target are independent draws even without a shift.
  CHECK_FALSE(bitwise_equal(id.source_points(), id.target_points()));

  // A pure translation moves the target mean by exactly that amount relative
  // to the unshifted draw of the same seed.
  const auto moved = make_shifted_task(TaskKind::kMoons, Shift{0.0, {100.0, 100.0}, 1.0, std::nullopt}, 500, 0);
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(moved.target_points()(i, 0) == doctest::Approx(id.target_points()(i, 0) + 100.0));
    CHECK(moved.target_points()(i, 1) == doctest::Approx(id.target_points()(i, 1) + 100.0));
  }
  CHECK(bitwise_equal(moved.source_points(), id.source_points()));

  // Rotation about a pivot preserves distances to it.
  const Shift rot{30.0, {0.0, 0.0}, 1.0, Vec2{0.5, 0.25}};
  Rng rng = make_rng(1, 0);
  const Tensor p = normal_tensor(rng, 10, 2);
  const Tensor q = rot.apply(p, {0.0, 0.0});
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(std::hypot(q(i, 0) - 0.5, q(i, 1) - 0.25) ==
          doctest::Approx(std::hypot(p(i, 0) - 0.5, p(i, 1) - 0.25)));

  CHECK_THROWS_AS(make_shifted_task(TaskKind::kMoons, Shift{0.0, {0, 0}, 0.0, std::nullopt}, 100, 0),
                  std::invalid_argument);
  CHECK(task_kind_from_name("blobs") == TaskKind::kBlobs);
  CHECK_THROWS_AS(task_kind_from_name("spiral"), std::invalid_argument);
}

TEST_CASE("target labels are unreachable inside a training scope") {
  const auto task = make_shifted_task(TaskKind::kMoons, Shift{30.0, {0, 0}, 1.0, std::nullopt}, 100, 0);
  CHECK_NOTHROW(task.target_labels_for_evaluation());
  {
    TrainingScope scope;
    CHECK(TrainingScope::active());
    CHECK_THROWS_AS(task.target_labels_for_evaluation(), LeakageError);
    // The training view only carries source labels and target points.
    const TrainingView v = task.training_view();
    CHECK(v.source_labels == &task.source_labels());
    CHECK(&v.target_points == &task.target_points());
  }
  CHECK_FALSE(TrainingScope::active());
  CHECK_NOTHROW(task.target_labels_for_evaluation());

  const auto unlabeled = make_synthetic_preset(SyntheticPreset::kMoons, 50, 0);
  CHECK_FALSE(unlabeled.has_source_labels());
  CHECK(unlabeled.training_view().source_labels == nullptr);
  CHECK_THROWS_AS(unlabeled.source_labels(), std::logic_error);
}

TEST_CASE("affine_normalize") {
  Rng rng = make_rng(2, 0);
  const Tensor p = normal_tensor(rng, 50, 2, 3.0, 2.0);

  const auto none = affine_normalize(p, NormalizeMode::kNone);
  CHECK(bitwise_equal(none.points, p));

  const auto single = affine_normalize(Tensor{{-1.0, 2.0}}, NormalizeMode::kShiftToNonneg);
  CHECK(single.points(0, 0) == doctest::Approx(kNonnegMargin));
  CHECK(single.points(0, 1) == doctest::Approx(kNonnegMargin));

  const auto nonneg = affine_normalize(p, NormalizeMode::kShiftToNonneg);
  double lo0 = 1e9, lo1 = 1e9;
  for (std::size_t i = 0; i < 50; ++i) {
    lo0 = std::min(lo0, nonneg.points(i, 0));
    lo1 = std::min(lo1, nonneg.points(i, 1));
  }
  CHECK(lo0 == doctest::Approx(kNonnegMargin));
  CHECK(lo1 == doctest::Approx(kNonnegMargin));

  const auto st = affine_normalize(p, NormalizeMode::kStandardize);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 50; ++i) m += st.points(i, c);
    m /= 50;
    for (std::size_t i = 0; i < 50; ++i) v += (st.points(i, c) - m) * (st.points(i, c) - m);
    v /= 50;
    CHECK(std::fabs(m) < 1e-9);
    CHECK(std::fabs(v - 1.0) < 1e-9);
  }
  for (const auto* n : {&nonneg, &st}) {
    const Tensor back = n->transform.invert(n->points);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(back[i] == doctest::Approx(p[i]).epsilon(1e-12));
    CHECK(bitwise_equal(n->transform.apply(p), n->points));
  }
  CHECK_THROWS_AS(affine_normalize(Tensor(0, 2), NormalizeMode::kNone), std::invalid_argument);
}

TEST_CASE("csv round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "gla_test_datasets";
  std::filesystem::create_directories(dir);
  const auto task = make_shifted_task(TaskKind::kBlobs, Shift{10.0, {1, 1}, 1.0, std::nullopt}, 40, 3);
  write_csv(task, dir / "task.csv");
  const auto back = read_csv(dir / "task.csv");
  CHECK(back.source_labels() == task.source_labels());
  CHECK(back.target_labels_for_evaluation() == task.target_labels_for_evaluation());
  for (std::size_t i = 0; i < task.source_points().size(); ++i) {
    CHECK(back.source_points()[i] == doctest::Approx(task.source_points()[i]).epsilon(1e-8));
    CHECK(back.target_points()[i] == doctest::Approx(task.target_points()[i]).epsilon(1e-8));
  }

  const auto unlabeled = make_synthetic_preset(SyntheticPreset::kGaussSameCov, 10, 0);
  write_csv(unlabeled, dir / "u.csv");
  const auto u = read_csv(dir / "u.csv");
  CHECK_FALSE(u.has_source_labels());
  CHECK_FALSE(u.has_target_labels());
  CHECK(u.source_points().rows() == 10);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "a,b\n1,2\n";
  }
  CHECK_THROWS(read_csv(dir / "bad.csv"));
  {
    std::ofstream bad(dir / "dom.csv");
    bad << "x0,x1,label,domain\n1,2,0,elsewhere\n";
  }
  CHECK_THROWS(read_csv(dir / "dom.csv"));
  CHECK_THROWS(read_csv(dir / "missing.csv"));
  std::filesystem::remove_all(dir);
}
