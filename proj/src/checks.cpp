#include "gla/checks.hpp"

#include <algorithm>
#include <functional>

#include "gla/gradcheck.hpp"
#include "gla/losses.hpp"
#include "gla/model.hpp"
#include "gla/rng.hpp"

namespace gla::checks {

using ad::Tape;
using ad::Var;

namespace {

struct Case {
  std::vector<Tensor> inputs;
  ad::TensorFunction fn;
  bool through_model = false;
};

using CaseFactory = std::function<Case(std::uint64_t seed, std::size_t m)>;

std::vector<int> random_labels(Rng& rng, std::size_t m, int classes) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> y(m);
  for (auto& v : y) v = d(rng);
  return y;
}

Case composite_case(std::uint64_t seed, std::size_t m) {
  // The model lives in the closure; checked parameters are re-bound to the
  // gradcheck's own leaves, everything else reads the model's storage.
  auto model = std::make_shared<model::ModelBundle>(model::ModelBundle::create({}, seed));
  Rng rng = make_rng(seed, 100);
  auto xs = std::make_shared<Tensor>(normal_tensor(rng, m, 2));
  auto xt = std::make_shared<Tensor>(normal_tensor(rng, m, 2, 0.5));
  auto zn = std::make_shared<Tensor>(normal_tensor(rng, m, model::kLatentDim));
  auto ys = std::make_shared<std::vector<int>>(random_labels(rng, m, 2));
  // Perturb the affine batchnorm parameters away from their (1, 0) init so
  // their gradients are exercised at a generic point.
  auto& bm_gamma = model->encoder_bn.gamma.value;
  for (auto& v : bm_gamma.values()) v = 1.0 + 0.1 * std::normal_distribution<>()(rng);

  // Decoder biases and decoder_bn.beta are left out on purpose: they shift
  // both members of a DAL pair alike, so their gradients cancel to ~0 and the
  // central difference returns pure roundoff of a loss in the hundreds.
  std::vector<const model::Parameter*> checked = {
      &model->encoder[0].weight,  &model->encoder[0].bias, &model->encoder_bn.gamma,
      &model->decoder_bn.gamma,   &model->head1.out.weight,
  };
  Case c;
  c.through_model = true;
  for (auto* p : checked) c.inputs.push_back(p->value);
  c.inputs.push_back(*xt);
  const losses::LossWeights w;
  c.fn = [=](Tape& tape, std::span<const Var> v) {
    model::BoundModel bm(*model, tape);
    for (std::size_t i = 0; i < checked.size(); ++i) bm.rebind(*checked[i], v[i]);
    Var zs = bm.encode(tape.constant(*xs), true);
    Var zt = bm.encode(v[checked.size()], true);
    Var loss = losses::softmax_cross_entropy(bm.classify(zs), *ys);
    loss = loss + losses::entropy_loss(bm.classify(zt));
    loss = loss + ad::scale(losses::kld_to_prior(zs), w.alpha);
    Var align = losses::dal(bm.decode(zt, true), bm.decode(tape.constant(*zn), true));
    return loss + ad::scale(align, w.beta);
  };
  return c;
}

struct Entry {
  const char* name;
  CaseFactory make;
};

std::vector<Entry> suite() {
  constexpr int kClasses = 3;
  constexpr std::size_t kWidth = 6;
  std::vector<Entry> s;
  s.push_back({"L_cls", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 101);
    auto y = random_labels(rng, m, kClasses);
    return Case{{normal_tensor(rng, m, kClasses)},
                [y](Tape&, std::span<const Var> v) { return losses::softmax_cross_entropy(v[0], y); }};
  }});
  s.push_back({"L_kld", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 102);
    return Case{{normal_tensor(rng, m, kWidth, 0.3, 1.5)},
                [](Tape&, std::span<const Var> v) { return losses::kld_to_prior(v[0]); }};
  }});
  s.push_back({"L_dal", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 103);
    return Case{{normal_tensor(rng, m, 2), normal_tensor(rng, m, 2)},
                [](Tape&, std::span<const Var> v) { return losses::dal(v[0], v[1]); }};
  }});
  s.push_back({"L_ent", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 104);
    return Case{{normal_tensor(rng, m, kClasses)},
                [](Tape&, std::span<const Var> v) { return losses::entropy_loss(v[0]); }};
  }});
  s.push_back({"L_adv", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 105);
    return Case{{normal_tensor(rng, m, kClasses), normal_tensor(rng, m, kClasses)},
                [](Tape&, std::span<const Var> v) {
                  return losses::mcd_discrepancy(ad::softmax_rows(v[0]), ad::softmax_rows(v[1]));
                }};
  }});
  s.push_back({"L_recon", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 106);
    return Case{{normal_tensor(rng, m, 2), normal_tensor(rng, m, 2)},
                [](Tape&, std::span<const Var> v) { return losses::recon(v[0], v[1]); }};
  }});
  s.push_back({"L_klddir", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 107);
    return Case{{normal_tensor(rng, m, kWidth), normal_tensor(rng, m, kWidth, 1.0, 2.0)},
                [](Tape&, std::span<const Var> v) { return losses::kld_direct(v[0], v[1]); }};
  }});
  s.push_back({"L_daldir", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 108);
    return Case{{normal_tensor(rng, m, 2), normal_tensor(rng, m, 2)},
                [](Tape&, std::span<const Var> v) { return losses::dal_direct(v[0], v[1]); }};
  }});
  s.push_back({"L_d", [](std::uint64_t seed, std::size_t m) {
    Rng rng = make_rng(seed, 109);
    Tensor prev = normal_tensor(rng, m, 1, 3.0, 0.5);
    return Case{{normal_tensor(rng, m, kWidth)}, [prev](Tape& tape, std::span<const Var> v) {
                  return losses::safn_feature_norm(tape.constant(prev), losses::feature_norms(v[0]), 1.0);
                }};
  }});
  s.push_back({"dfa_ent_composite", composite_case});
  return s;
}

}  // namespace

std::vector<LossCheck> run_gradcheck_suite(const SuiteOptions& opt) {
  if (opt.seeds == 0) throw std::invalid_argument("gradcheck suite: seeds must be >= 1");
  if (opt.batch < 2) throw std::invalid_argument("gradcheck suite: batch must be >= 2");
  ad::GradCheckOptions go;
  go.step = opt.step;
  go.tol = opt.tol;
  if (opt.fault) go.prepare_tape = [op = *opt.fault](Tape& t) { t.inject_gradient_fault(op); };
  std::vector<LossCheck> out;
  for (const auto& [name, make] : suite()) {
    LossCheck lc{name, opt.seeds, 0, 0.0, 0, 0};
    for (std::size_t s = 0; s < opt.seeds; ++s) {
      Case c = make(1000 + s, opt.batch);
      go.excuse_nonsmooth = c.through_model;
      const auto r = ad::finite_difference_check(c.fn, c.inputs, go);
      lc.entries += r.checked;
      lc.excused += r.excused;
      lc.passed += r.passed ? 1 : 0;
      lc.max_rel_error = std::max(lc.max_rel_error, r.max_rel_error);
    }
    out.push_back(lc);
  }
  return out;
}

}  // namespace gla::checks
