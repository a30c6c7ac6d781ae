#include <cmath>

#include "doctest.h"
#include "gla/autodiff.hpp"
#include "gla/gradcheck.hpp"
#include "gla/rng.hpp"

using namespace gla;
using namespace gla::ad;

namespace {

// Random tensor whose entries stay at least `gap` away from zero.
Tensor away_from_zero(Rng& rng, std::size_t r, std::size_t c, double gap = 1e-3) {
  Tensor t = normal_tensor(rng, r, c);
  for (auto& v : t.values())
    if (std::fabs(v) < gap) v = v < 0 ? -gap - std::fabs(v) : gap + std::fabs(v);
  return t;
}

Tensor positive(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t = normal_tensor(rng, r, c);
  for (auto& v : t.values()) v = std::fabs(v) + 0.5;
  return t;
}

// Weighted sum with fixed random weights, so no primitive's gradient hides
// behind a symmetric reduction.
Var weighted(Var v, const Tensor& w) { return sum_all(mul(v, v.tape().constant(w))); }

}  // namespace

TEST_CASE("primitive forward examples") {
  Tape t;
  CHECK(relu(t.leaf({{-1.0, 2.0}})).value() == Tensor{{0.0, 2.0}});
  CHECK(matmul(t.leaf({{1.0, 2.0}}), t.leaf({{3.0}, {4.0}})).value() == Tensor{{11.0}});
  const Tensor s = softmax_rows(t.leaf({{0.0, 0.0}})).value();
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(0, 1) == doctest::Approx(0.5));
  // W (2×3) read transposed in place: x(1×3)·Wᵀ.
  const Tensor w{{1.0, 0.0, 2.0}, {0.0, 1.0, -1.0}};
  const Tensor xt = matmul_transposed(t.leaf({{1.0, 2.0, 3.0}}), t.param(w)).value();
  CHECK(xt == Tensor{{7.0, -1.0}});
}

TEST_CASE("softmax is stable for large logits") {
  Tape t;
  const Tensor s = softmax_rows(t.leaf({{1000.0, 1000.0}, {-1000.0, 0.0}})).value();
  CHECK(s.all_finite());
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("backward: mean of relu in the linear region") {
  Tape t;
  Var x = t.leaf({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  t.backward(mean_all(relu(x)));
  for (double g : t.grad(x).values()) CHECK(g == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("backward: mean of softmax has zero gradient") {
  Rng rng = make_rng(7, 0);
  Tape t;
  Var z = t.leaf(normal_tensor(rng, 5, 4));
  t.backward(mean_all(softmax_rows(z)));
  for (double g : t.grad(z).values()) CHECK(std::fabs(g) < 1e-15);
}

TEST_CASE("tied weight accumulates both path gradients") {
  Rng rng = make_rng(11, 0);
  const Tensor w0 = normal_tensor(rng, 3, 3);
  const Tensor x = normal_tensor(rng, 4, 3);
  const Tensor y = normal_tensor(rng, 4, 3);

  auto composite = [&](Tape& t, Var w) {
    return mean_all(add(matmul(t.constant(x), w), matmul_transposed(t.constant(y), w)));
  };
  const auto fd = finite_difference_check(composite, w0, 1e-5, 1e-4);
  CHECK(fd.passed);

  // Sum of the two single-path gradients equals the composite gradient.
  auto grad_of = [&](const std::function<Var(Tape&, Var)>& f) {
    Tape t;
    Var w = t.leaf(w0);
    t.backward(f(t, w));
    return t.grad(w);
  };
  const Tensor g_both = grad_of(composite);
  const Tensor g_direct = grad_of([&](Tape& t, Var w) { return mean_all(matmul(t.constant(x), w)); });
  const Tensor g_trans =
      grad_of([&](Tape& t, Var w) { return mean_all(matmul_transposed(t.constant(y), w)); });
  for (std::size_t i = 0; i < g_both.size(); ++i)
    CHECK(g_both[i] == doctest::Approx(g_direct[i] + g_trans[i]).epsilon(1e-12));
  // Neither path alone matches the composite.
  bool differs = false;
  for (std::size_t i = 0; i < g_both.size(); ++i) differs |= std::fabs(g_both[i] - g_direct[i]) > 1e-6;
  CHECK(differs);
}

TEST_CASE("param reads external storage without copying") {
  Tensor w{{1.0, 2.0}};
  Tape t;
  Var p = t.param(w);
  CHECK(&p.value() == &w);
  Var frozen = t.param(w, false);
  t.backward(sum_all(mul(p, frozen)));
  CHECK(t.grad(p) == Tensor{{1.0, 2.0}});
  CHECK(t.grad(frozen) == Tensor{{0.0, 0.0}});
}

TEST_CASE("finite-difference check: pass, fail and negative control") {
  Rng rng = make_rng(3, 0);
  const Tensor at = normal_tensor(rng, 3, 4);
  auto sumsq = [](Tape&, Var x) { return sum_all(square(x)); };
  const auto ok = finite_difference_check(sumsq, at, 1e-5, 1e-4);
  CHECK(ok.passed);
  CHECK(ok.max_rel_error < 1e-8);

  GradCheckOptions broken;
  broken.prepare_tape = [](Tape& t) { t.inject_gradient_fault(Op::kSquare); };
  const auto bad = finite_difference_check(
      [](Tape&, std::span<const Var> v) { return sum_all(square(v[0])); }, {at}, broken);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-6));

  CHECK_THROWS_AS(finite_difference_check([](Tape&, Var x) { return square(x); }, at, 1e-5, 1e-4),
                  ShapeError);
  CHECK_THROWS_AS(finite_difference_check(sumsq, at, 0.0, 1e-4), std::invalid_argument);
}

TEST_CASE("nonsmooth excuse covers kinks but never a wrong gradient") {
  // |x| with an entry inside the stencil of its kink.
  const Tensor at{{2e-6, 0.7, -1.3}};
  GradCheckOptions strict;
  auto f = [](Tape&, std::span<const Var> v) { return sum_all(abs(v[0])); };
  CHECK_FALSE(finite_difference_check(f, {at}, strict).passed);
  GradCheckOptions lenient;
  lenient.excuse_nonsmooth = true;
  lenient.max_excused_fraction = 0.5;
  const auto r = finite_difference_check(f, {at}, lenient);
  CHECK(r.passed);
  CHECK(r.excused == 1);
  CHECK(r.checked == 3);
  // Same point, corrupted rule: smooth entries still fail.
  lenient.prepare_tape = [](Tape& t) { t.inject_gradient_fault(Op::kAbs); };
  CHECK_FALSE(finite_difference_check(f, {at}, lenient).passed);
  // Too many excused entries fail outright.
  GradCheckOptions capped;
  capped.excuse_nonsmooth = true;
  capped.max_excused_fraction = 0.0;
  CHECK_FALSE(finite_difference_check(f, {at}, capped).passed);
}

TEST_CASE("every primitive passes the finite-difference check over 100 seeds") {
  struct Prim {
    const char* name;
    std::function<GradCheckResult(Rng&)> run;
  };
  std::uniform_int_distribution<std::size_t> dim(2, 8);
  auto check = [](std::vector<Tensor> at, TensorFunction f) {
    return finite_difference_check(f, std::move(at));
  };
  const std::vector<Prim> prims = {
      {"matmul", [&](Rng& g) {
         const std::size_t m = dim(g), k = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, k), normal_tensor(g, k, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(matmul(v[0], v[1]), w); });
       }},
      {"matmul_transposed", [&](Rng& g) {
         const std::size_t m = dim(g), k = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, k), normal_tensor(g, n, k)}, [w](Tape&, std::span<const Var> v) {
           return weighted(matmul_transposed(v[0], v[1]), w);
         });
       }},
      {"add_row_bias", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n), normal_tensor(g, 1, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(add_row_bias(v[0], v[1]), w); });
       }},
      {"add", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n), normal_tensor(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(add(v[0], v[1]), w); });
       }},
      {"sub", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n), normal_tensor(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(sub(v[0], v[1]), w); });
       }},
      {"mul", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n), normal_tensor(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(mul(v[0], v[1]), w); });
       }},
      {"div", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n), positive(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(div(v[0], v[1]), w); });
       }},
      {"relu", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({away_from_zero(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(relu(v[0]), w); });
       }},
      {"log", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({positive(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(log(v[0]), w); });
       }},
      {"exp", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(exp(v[0]), w); });
       }},
      {"softmax_rows", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(softmax_rows(v[0]), w); });
       }},
      {"log_softmax_rows", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(log_softmax_rows(v[0]), w); });
       }},
      {"mean_all", [&](Rng& g) {
         return check({normal_tensor(g, dim(g), dim(g))},
                      [](Tape&, std::span<const Var> v) { return mean_all(square(v[0])); });
       }},
      {"sum_all", [&](Rng& g) {
         return check({normal_tensor(g, dim(g), dim(g))},
                      [](Tape&, std::span<const Var> v) { return sum_all(square(v[0])); });
       }},
      {"abs", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({away_from_zero(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(abs(v[0]), w); });
       }},
      {"square", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(square(v[0]), w); });
       }},
      {"sqrt", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({positive(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(sqrt(v[0]), w); });
       }},
      {"batchnorm_rows(train)", [&](Rng& g) {
         const std::size_t m = dim(g) + 1, n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n, 0.0, 2.0), normal_tensor(g, 1, n, 1.0, 0.2), normal_tensor(g, 1, n)},
                      [w](Tape&, std::span<const Var> v) {
                        BatchNormStats st(v[0].cols());
                        return weighted(batchnorm_rows(v[0], v[1], v[2], &st, BatchNormMode::kTrain), w);
                      });
       }},
      {"batchnorm_rows(eval)", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         BatchNormStats st(n);
         st.running_mean = normal_tensor(g, 1, n);
         st.running_var = positive(g, 1, n);
         return check({normal_tensor(g, m, n), normal_tensor(g, 1, n), normal_tensor(g, 1, n)},
                      [w, st](Tape&, std::span<const Var> v) mutable {
                        return weighted(batchnorm_rows(v[0], v[1], v[2], &st, BatchNormMode::kEval), w);
                      });
       }},
      {"scale", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(scale(v[0], -2.5), w); });
       }},
      {"add_scalar", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(add_scalar(v[0], 3.0), w); });
       }},
      {"row_sum", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, 1);
         return check({normal_tensor(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(row_sum(v[0]), w); });
       }},
      {"col_mean", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, 1, n);
         return check({normal_tensor(g, m, n)}, [w](Tape&, std::span<const Var> v) { return weighted(col_mean(v[0]), w); });
       }},
      {"sub_row", [&](Rng& g) {
         const std::size_t m = dim(g), n = dim(g);
         const Tensor w = normal_tensor(g, m, n);
         return check({normal_tensor(g, m, n), normal_tensor(g, 1, n)},
                      [w](Tape&, std::span<const Var> v) { return weighted(sub_row(v[0], v[1]), w); });
       }},
  };
  for (const auto& p : prims) {
    CAPTURE(p.name);
    double worst = 0.0;
    int passed = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng = make_rng(seed, 42);
      const auto r = p.run(rng);
      passed += r.passed ? 1 : 0;
      worst = std::max(worst, r.max_rel_error);
    }
    CAPTURE(worst);
    CHECK(passed == 100);
  }
}

TEST_CASE("determinism: identical inputs give bit-identical values and gradients") {
  auto run = [] {
    Rng rng = make_rng(5, 0);
    Tape t;
    Var x = t.leaf(normal_tensor(rng, 6, 5));
    Var w = t.leaf(normal_tensor(rng, 4, 5));
    BatchNormStats st(4);
    Var h = batchnorm_rows(relu(matmul_transposed(x, w)), t.constant(Tensor(1, 4, 1.0)),
                           t.constant(Tensor(1, 4)), &st, BatchNormMode::kTrain);
    Var loss = mean_all(log_softmax_rows(h));
    t.backward(loss);
    return std::make_tuple(loss.item(), t.grad(x), t.grad(w));
  };
  const auto a = run();
  const auto b = run();
  CHECK(std::get<0>(a) == std::get<0>(b));
  CHECK(bitwise_equal(std::get<1>(a), std::get<1>(b)));
  CHECK(bitwise_equal(std::get<2>(a), std::get<2>(b)));
}

TEST_CASE("batchnorm: train mode standardizes columns, eval mode is affine") {
  Rng rng = make_rng(9, 0);
  Tensor x = normal_tensor(rng, 64, 5, 3.0, 40.0);
  Tape t;
  BatchNormStats st(5);
  const Tensor y = batchnorm_rows(t.constant(x), t.constant(Tensor(1, 5, 1.0)), t.constant(Tensor(1, 5)), &st,
                                  BatchNormMode::kTrain)
                       .value();
  for (std::size_t c = 0; c < 5; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < 64; ++r) mean += y(r, c);
    mean /= 64.0;
    for (std::size_t r = 0; r < 64; ++r) var += (y(r, c) - mean) * (y(r, c) - mean);
    var /= 64.0;
    CHECK(std::fabs(mean) < 1e-6);
    CHECK(std::fabs(var - 1.0) < 1e-6);
  }
  // Running statistics moved 10% of the way towards the batch statistics.
  double bm = 0.0;
  for (std::size_t r = 0; r < 64; ++r) bm += x(r, 0);
  bm /= 64.0;
  CHECK(st.running_mean(0, 0) == doctest::Approx(0.1 * bm));

  // Frozen mode normalizes the same way but leaves the statistics alone.
  const BatchNormStats before = st;
  batchnorm_rows(t.constant(x), t.constant(Tensor(1, 5, 1.0)), t.constant(Tensor(1, 5)), &st,
                 BatchNormMode::kTrainFrozen);
  CHECK(st.running_mean == before.running_mean);
  CHECK(st.running_var == before.running_var);

  // Eval: f(a·x1 + (1−a)·x2) == a·f(x1) + (1−a)·f(x2) row-wise.
  const Tensor gamma = normal_tensor(rng, 1, 5), beta = normal_tensor(rng, 1, 5);
  auto f = [&](const Tensor& in) {
    Tape e;
    return batchnorm_rows(e.constant(in), e.constant(gamma), e.constant(beta), &st, BatchNormMode::kEval).value();
  };
  const Tensor x1 = normal_tensor(rng, 3, 5), x2 = normal_tensor(rng, 3, 5);
  Tensor mix(3, 5);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.3 * x1[i] + 0.7 * x2[i];
  const Tensor f1 = f(x1), f2 = f(x2), fm = f(mix);
  for (std::size_t i = 0; i < fm.size(); ++i) CHECK(fm[i] == doctest::Approx(0.3 * f1[i] + 0.7 * f2[i]));
}

TEST_CASE("error paths") {
  Tape t;
  CHECK_THROWS_AS(matmul(t.leaf(Tensor(2, 3)), t.leaf(Tensor(2, 3))), ShapeError);
  CHECK_THROWS_AS(add(t.leaf(Tensor(2, 3)), t.leaf(Tensor(3, 2))), ShapeError);
  CHECK_THROWS_AS(log(t.leaf({{1.0, 0.0}})), NumericError);
  CHECK_THROWS_AS(log(t.leaf({{-1.0}})), NumericError);
  Var x = t.leaf({{1.0, 2.0}});
  CHECK_THROWS_AS(t.apply(static_cast<Op>(999), std::vector<Var>{x}), std::invalid_argument);
  // Non-scalar loss.
  CHECK_THROWS(t.backward(relu(x)));
  // A loss from another tape is disconnected from this one.
  Tape other;
  Var y = other.leaf({{1.0}});
  CHECK_THROWS(t.backward(sum_all(y)));
  // Overflow is a hard error, not a silent Inf.
  CHECK_THROWS_AS(exp(t.leaf({{1000.0}})), NumericError);
}

TEST_CASE("op names round-trip") {
  for (int k = 0; k <= static_cast<int>(Op::kSubRow); ++k) {
    const auto op = static_cast<Op>(k);
    CHECK(op_from_name(op_name(op)) == op);
  }
  CHECK_FALSE(op_from_name("nope").has_value());
}
