#include "gla/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gla/metrics.hpp"

namespace gla::train {

using ad::Tape;
using ad::Var;
using model::BoundModel;
using model::ModelBundle;

namespace {

struct VariantInfo {
  Variant v;
  const char* name;
};

constexpr VariantInfo kVariants[] = {
    {Variant::kSourceOnly, "source_only"},
    {Variant::kSourceEnt, "source_ent"},
    {Variant::kDfaEnt, "dfa_ent"},
    {Variant::kDfaMcd, "dfa_mcd"},
    {Variant::kDfaSafn, "dfa_safn"},
    {Variant::kDalOnly, "dal_only"},
    {Variant::kAblationUntied, "ablation_untied"},
    {Variant::kAblationKldTarget, "ablation_kld_target"},
    {Variant::kAblationDalDirect, "ablation_daldir"},
    {Variant::kAblationKldDirect, "ablation_klddir"},
    {Variant::kAblationKldDirRecon, "ablation_klddir_recon"},
};

// Variance floor for moment-matching KL terms used as training objectives.
constexpr double kTrainVarianceFloor = 1e-8;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Index batches for one epoch. An epoch is one pass over the larger domain;
/// the smaller domain cycles through fresh permutations. With `paired`, both
/// domains share one permutation so row i of a source batch always meets the
/// same target row.
class EpochBatcher {
 public:
  EpochBatcher(std::size_t ns, std::size_t nt, std::size_t batch, std::uint64_t seed, bool paired)
      : ns_(ns), nt_(nt), batch_(batch), paired_(paired), rng_(make_rng(seed, Stream::kBatching)) {
    if (batch_ < 2) throw std::invalid_argument("batch size must be >= 2");
    if (batch_ > std::max(ns, nt))
      throw std::invalid_argument("batch size " + std::to_string(batch) +
                                  " is larger than the dataset");
  }

  struct Batch {
    std::vector<std::size_t> source;
    std::vector<std::size_t> target;
  };

  std::vector<Batch> next_epoch() {
    const std::size_t len = std::max(ns_, nt_);
    const auto s = cycled(ns_, len);
    const auto t = paired_ ? remap(s, nt_) : cycled(nt_, len);
    std::vector<Batch> out;
    for (std::size_t off = 0; off < len; off += batch_) {
      const std::size_t end = std::min(len, off + batch_);
      if (end - off < 2) break;  // a 1-row batch has no batch statistics
      out.push_back({{s.begin() + off, s.begin() + end}, {t.begin() + off, t.begin() + end}});
    }
    return out;
  }

 private:
  std::vector<std::size_t> cycled(std::size_t n, std::size_t len) {
    std::vector<std::size_t> out;
    out.reserve(len + n);
    while (out.size() < len) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng_);
      out.insert(out.end(), perm.begin(), perm.end());
    }
    out.resize(len);
    return out;
  }
  static std::vector<std::size_t> remap(const std::vector<std::size_t>& s, std::size_t n) {
    std::vector<std::size_t> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] % n;
    return out;
  }

  std::size_t ns_, nt_, batch_;
  bool paired_;
  Rng rng_;
};

/// Training-visible copy of the data, normalized when the decoder ends in ReLU.
struct Workspace {
  Tensor xs;
  Tensor xt;
  const data::Labels* ys = nullptr;
  std::optional<data::AffineTransform> transform;
};

Workspace prepare(const Tensor& xs, const Tensor& xt, const data::Labels* ys,
                  model::FinalActivation final_act) {
  Workspace w{xs, xt, ys, std::nullopt};
  if (final_act == model::FinalActivation::kRelu) {
    // One transform for both domains, fitted on their union.
    Tensor both(xs.rows() + xt.rows(), xs.cols());
    std::copy(xs.values().begin(), xs.values().end(), both.values().begin());
    std::copy(xt.values().begin(), xt.values().end(), both.values().begin() + xs.size());
    auto norm = data::affine_normalize(both, data::NormalizeMode::kShiftToNonneg);
    w.xs = norm.transform.apply(xs);
    w.xt = norm.transform.apply(xt);
    w.transform = std::move(norm.transform);
  }
  return w;
}

std::vector<int> gather(const data::Labels& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

model::ModelOptions options_for(const data::DomainPair& data, const TrainConfig& cfg) {
  model::ModelOptions o;
  o.num_classes = std::max<std::size_t>(data.num_classes(), 2);
  o.decoder_final = cfg.decoder_final;
  o.tied = cfg.variant != Variant::kAblationUntied;
  o.two_heads = cfg.variant == Variant::kDfaMcd;
  return o;
}

void require_labels(const data::DomainPair& data, const char* who) {
  if (!data.has_source_labels()) throw std::invalid_argument(std::string(who) + ": source labels required");
}

void notify(const StepObserver& obs, Phase ph, bool after, std::size_t it, std::size_t ep,
            const ModelBundle& m) {
  if (obs) obs(StepEvent{ph, after, it, ep, m});
}

double eval_accuracy(ModelBundle& m, const data::DomainPair& data) {
  return data.has_target_labels() ? target_accuracy(m, data) : 0.0;
}

/// Running per-epoch means of named loss components.
struct EpochAccumulator {
  std::vector<double> sums;
  std::size_t steps = 0;
  explicit EpochAccumulator(std::size_t n) : sums(n, 0.0) {}
  void add(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) sums[i] += v[i];
    ++steps;
  }
  std::vector<double> means() const {
    std::vector<double> out(sums);
    for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(steps, 1));
    return out;
  }
};

bool uses_target_entropy(Variant v) { return v != Variant::kSourceOnly; }
bool uses_source_kld(Variant v) { return v != Variant::kSourceOnly && v != Variant::kSourceEnt; }

}  // namespace

std::string variant_name(Variant v) {
  for (const auto& i : kVariants)
    if (i.v == v) return i.name;
  return "?";
}

Variant variant_from_name(const std::string& s) {
  for (const auto& i : kVariants)
    if (s == i.name) return i.v;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

void TrainConfig::validate() const {
  weights.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
  if (batch < 2) throw std::invalid_argument("batch must be >= 2");
  if (mcd_inner_n < 1) throw std::invalid_argument("mcd_inner_n must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant_name(variant);
  j["alpha"] = weights.alpha;
  j["beta"] = weights.beta;
  j["kappa"] = weights.kappa;
  j["delta_r"] = weights.delta_r;
  j["lr"] = lr;
  j["batch"] = batch;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["optimizer"] = optimizer_name(optimizer);
  j["mcd_inner_n"] = mcd_inner_n;
  j["decoder_final"] = model::final_activation_name(decoder_final);
  return j;
}

TrainConfig digit_preset() {
  TrainConfig c;
  c.weights.alpha = 0.01;
  c.weights.beta = 10.0;
  c.lr = 2e-4;
  c.batch = 128;
  c.optimizer = OptimizerKind::kAdam;
  c.mcd_inner_n = 4;
  return c;
}

TrainConfig object_preset() {
  TrainConfig c = digit_preset();
  c.weights.alpha = 0.1;
  c.lr = 1e-3;
  c.batch = 32;
  c.optimizer = OptimizerKind::kSgd;
  return c;
}

TrainConfig synthetic_preset() {
  TrainConfig c;
  c.variant = Variant::kDalOnly;
  c.lr = 1e-3;
  c.batch = 500;
  c.epochs = 2000;
  c.optimizer = OptimizerKind::kAdam;
  return c;
}

Tensor model_input(const ModelBundle& m, const data::DomainPair& data, bool target) {
  Workspace ws = prepare(data.source_points(), data.target_points(), nullptr, m.options().decoder_final);
  return target ? std::move(ws.xt) : std::move(ws.xs);
}

double target_accuracy(ModelBundle& m, const data::DomainPair& data) {
  const auto& labels = data.target_labels_for_evaluation();
  Tensor xt = model_input(m, data, true);
  Tape tape;
  BoundModel b(m, tape, 0);
  Var z = b.encode(tape.constant(std::move(xt)), false);
  if (!m.head2) return metrics::accuracy(b.classify(z, 1).value(), labels);
  Var p = ad::add(ad::softmax_rows(b.classify(z, 1)), ad::softmax_rows(b.classify(z, 2)));
  return metrics::accuracy(p.value(), labels);
}

// ---------------------------------------------------------------------------
// DFA-ENT and the single-objective alignment ablations

TrainResult train_dfa_ent(const data::DomainPair& data, const TrainConfig& cfg,
                          const StepObserver& observer) {
  cfg.validate();
  require_labels(data, "train_dfa_ent");
  const Variant v = cfg.variant;
  switch (v) {
    case Variant::kSourceOnly: case Variant::kSourceEnt: case Variant::kDfaEnt:
    case Variant::kAblationUntied: case Variant::kAblationKldTarget:
    case Variant::kAblationDalDirect: case Variant::kAblationKldDirect:
    case Variant::kAblationKldDirRecon:
      break;
    default:
      throw std::invalid_argument("train_dfa_ent: variant " + variant_name(v) + " not supported");
  }
  const auto view = data.training_view();
  Workspace ws = prepare(view.source_points, view.target_points, view.source_labels, cfg.decoder_final);
  ModelBundle m = ModelBundle::create(options_for(data, cfg), cfg.seed);
  Optimizer opt(cfg.optimizer, cfg.lr);
  EpochBatcher batcher(ws.xs.rows(), ws.xt.rows(), cfg.batch, cfg.seed, false);
  model::PriorSampler prior(cfg.seed);
  const auto& w = cfg.weights;

  RunReport report({"loss_total", "loss_cls", "loss_ent", "loss_kld", "loss_align", "loss_recon",
                    "target_accuracy"});
  report.seed = cfg.seed;
  report.config = cfg.to_json();
  const auto t0 = Clock::now();
  std::size_t it = 0;
  for (std::size_t ep = 1; ep <= cfg.epochs; ++ep) {
    EpochAccumulator acc(6);
    for (const auto& bt : batcher.next_epoch()) {
      data::TrainingScope scope;
      Tape tape;
      BoundModel bm(m, tape);
      const auto ys = gather(*ws.ys, bt.source);
      Var xs = tape.constant(ws.xs.rows_subset(bt.source));
      Var zs = bm.encode(xs, true);
      Var total = losses::softmax_cross_entropy(bm.classify(zs), ys);
      double l_ent = 0, l_kld = 0, l_align = 0, l_recon = 0;
      const double l_cls = total.item();
      if (uses_target_entropy(v)) {
        Var xt = tape.constant(ws.xt.rows_subset(bt.target));
        Var zt = bm.encode(xt, true);
        Var ent = losses::entropy_loss(bm.classify(zt));
        l_ent = ent.item();
        total = ad::add(total, ent);
        if (uses_source_kld(v)) {
          Var kld = losses::kld_to_prior(zs, kTrainVarianceFloor);
          l_kld = kld.item();
          total = ad::add(total, ad::scale(kld, w.alpha));
          Var align;
          switch (v) {
            case Variant::kDfaEnt:
            case Variant::kAblationUntied: {
              Var zn = tape.constant(prior.sample(bt.target.size()));
              align = losses::dal(bm.decode(zt, true), bm.decode(zn, true));
              break;
            }
            case Variant::kAblationKldTarget:
              align = losses::kld_to_prior(zt, kTrainVarianceFloor);
              break;
            case Variant::kAblationDalDirect:
              align = losses::dal_direct(bm.decode(zs, true), bm.decode(zt, true));
              break;
            case Variant::kAblationKldDirect:
              align = losses::kld_direct(zs, zt, kTrainVarianceFloor);
              break;
            case Variant::kAblationKldDirRecon: {
              align = losses::kld_direct(zs, zt, kTrainVarianceFloor);
              Var rec = ad::add(losses::recon(bm.decode(zs, true), xs),
                                losses::recon(bm.decode(zt, true), xt));
              l_recon = rec.item();
              total = ad::add(total, rec);
              break;
            }
            default:
              break;
          }
          l_align = align.item();
          total = ad::add(total, ad::scale(align, w.beta));
        }
      }
      tape.backward(total);
      notify(observer, Phase::kStep, false, it, ep, m);
      opt.step(bm, model::kAllGroups);
      notify(observer, Phase::kStep, true, it, ep, m);
      acc.add({total.item(), l_cls, l_ent, l_kld, l_align, l_recon});
      ++it;
    }
    auto row = acc.means();
    row.push_back(eval_accuracy(m, data));
    report.add_row(std::move(row), seconds_since(t0));
  }
  report.summary["variant"] = variant_name(v);
  report.summary["iterations"] = it;
  report.summary["target_accuracy"] = report.last("target_accuracy");
  return {std::move(m), std::move(report), std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------
// DFA-MCD: three steps per minibatch

TrainResult train_dfa_mcd(const data::DomainPair& data, const TrainConfig& cfg,
                          const StepObserver& observer) {
  cfg.validate();
  require_labels(data, "train_dfa_mcd");
  TrainConfig c = cfg;
  c.variant = Variant::kDfaMcd;
  const auto view = data.training_view();
  Workspace ws = prepare(view.source_points, view.target_points, view.source_labels, c.decoder_final);
  ModelBundle m = ModelBundle::create(options_for(data, c), c.seed);
  Optimizer opt(c.optimizer, c.lr);
  EpochBatcher batcher(ws.xs.rows(), ws.xt.rows(), c.batch, c.seed, false);
  model::PriorSampler prior(c.seed);
  const auto& w = c.weights;
  using model::kDecoder;
  using model::kEncoder;
  using model::kHead1;
  using model::kHead2;

  RunReport report({"loss_step1", "loss_step2", "loss_step3", "loss_cls", "loss_kld",
                    "discrepancy", "loss_dal", "target_accuracy"});
  report.seed = c.seed;
  report.config = c.to_json();
  const auto t0 = Clock::now();
  std::size_t it = 0;
  for (std::size_t ep = 1; ep <= c.epochs; ++ep) {
    EpochAccumulator acc(7);
    for (const auto& bt : batcher.next_epoch()) {
      data::TrainingScope scope;
      const auto ys = gather(*ws.ys, bt.source);
      const Tensor xs_b = ws.xs.rows_subset(bt.source);
      const Tensor xt_b = ws.xt.rows_subset(bt.target);

      // Step 1: update G, F1, F2 on L_cls + α L_kld.
      double s1, l_cls, l_kld;
      {
        Tape tape;
        BoundModel bm(m, tape, kEncoder | kHead1 | kHead2);
        Var zs = bm.encode(tape.constant(xs_b), true);
        Var cls = ad::add(losses::softmax_cross_entropy(bm.classify(zs, 1), ys),
                          losses::softmax_cross_entropy(bm.classify(zs, 2), ys));
        Var kld = losses::kld_to_prior(zs, kTrainVarianceFloor);
        Var total = ad::add(cls, ad::scale(kld, w.alpha));
        tape.backward(total);
        notify(observer, Phase::kMcdStep1, false, it, ep, m);
        opt.step(bm, kEncoder | kHead1 | kHead2);
        notify(observer, Phase::kMcdStep1, true, it, ep, m);
        s1 = total.item();
        l_cls = cls.item();
        l_kld = kld.item();
      }
      // Step 2: G fixed; F1, F2 minimize L_cls − L_adv + α L_kld.
      double s2;
      {
        Tape tape;
        BoundModel bm(m, tape, kHead1 | kHead2);
        Var zs = bm.encode(tape.constant(xs_b), true);
        Var zt = bm.encode(tape.constant(xt_b), true);
        Var cls = ad::add(losses::softmax_cross_entropy(bm.classify(zs, 1), ys),
                          losses::softmax_cross_entropy(bm.classify(zs, 2), ys));
        Var adv = losses::mcd_discrepancy(ad::softmax_rows(bm.classify(zt, 1)),
                                          ad::softmax_rows(bm.classify(zt, 2)));
        Var kld = losses::kld_to_prior(zs, kTrainVarianceFloor);
        Var total = ad::add(ad::sub(cls, adv), ad::scale(kld, w.alpha));
        tape.backward(total);
        notify(observer, Phase::kMcdStep2, false, it, ep, m);
        opt.step(bm, kHead1 | kHead2);
        notify(observer, Phase::kMcdStep2, true, it, ep, m);
        s2 = total.item();
      }
      // Step 3: F1, F2 fixed; G and D minimize L_adv + β L_dal, n times,
      // with a fresh prior batch each time.
      double s3 = 0, disc = 0, l_dal = 0;
      for (std::size_t k = 0; k < c.mcd_inner_n; ++k) {
        Tape tape;
        BoundModel bm(m, tape, kEncoder | kDecoder);
        Var zt = bm.encode(tape.constant(xt_b), true);
        Var adv = losses::mcd_discrepancy(ad::softmax_rows(bm.classify(zt, 1)),
                                          ad::softmax_rows(bm.classify(zt, 2)));
        Var zn = tape.constant(prior.sample(xt_b.rows()));
        Var dal = losses::dal(bm.decode(zt, true), bm.decode(zn, true));
        Var total = ad::add(adv, ad::scale(dal, w.beta));
        tape.backward(total);
        notify(observer, Phase::kMcdStep3, false, it, ep, m);
        opt.step(bm, kEncoder | kDecoder);
        notify(observer, Phase::kMcdStep3, true, it, ep, m);
        if (k == 0) {
          s3 = total.item();
          disc = adv.item();
          l_dal = dal.item();
        }
      }
      acc.add({s1, s2, s3, l_cls, l_kld, disc, l_dal});
      ++it;
    }
    auto row = acc.means();
    row.push_back(eval_accuracy(m, data));
    report.add_row(std::move(row), seconds_since(t0));
  }
  report.summary["variant"] = variant_name(c.variant);
  report.summary["iterations"] = it;
  report.summary["target_accuracy"] = report.last("target_accuracy");
  report.summary["first_epoch_discrepancy"] = report.column("discrepancy").front();
  report.summary["final_epoch_discrepancy"] = report.last("discrepancy");
  return {std::move(m), std::move(report), std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------
// DFA-SAFN

TrainResult train_dfa_safn(const data::DomainPair& data, const TrainConfig& cfg,
                           const StepObserver& observer) {
  cfg.validate();
  require_labels(data, "train_dfa_safn");
  TrainConfig c = cfg;
  c.variant = Variant::kDfaSafn;
  const auto view = data.training_view();
  Workspace ws = prepare(view.source_points, view.target_points, view.source_labels, c.decoder_final);
  ModelBundle m = ModelBundle::create(options_for(data, c), c.seed);
  Optimizer opt(c.optimizer, c.lr);
  EpochBatcher batcher(ws.xs.rows(), ws.xt.rows(), c.batch, c.seed, false);
  model::PriorSampler prior(c.seed);
  const auto& w = c.weights;
  // h(x; θ_p) per sample, NaN until first seen.
  std::vector<double> cache_s(ws.xs.rows(), std::nan("")), cache_t(ws.xt.rows(), std::nan(""));

  RunReport report({"loss_total", "loss_cls", "loss_ent", "loss_kld", "loss_dal", "loss_norm",
                    "mean_feature_norm", "target_accuracy"});
  report.seed = c.seed;
  report.config = c.to_json();
  const auto t0 = Clock::now();
  std::size_t it = 0;

  auto previous = [](const std::vector<double>& cache, const std::vector<std::size_t>& idx,
                     const Tensor& current) {
    Tensor prev(idx.size(), 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      prev[i] = std::isnan(cache[idx[i]]) ? current[i] : cache[idx[i]];
    return prev;
  };

  for (std::size_t ep = 1; ep <= c.epochs; ++ep) {
    EpochAccumulator acc(7);
    for (const auto& bt : batcher.next_epoch()) {
      data::TrainingScope scope;
      Tape tape;
      BoundModel bm(m, tape);
      const auto ys = gather(*ws.ys, bt.source);
      Var zs = bm.encode(tape.constant(ws.xs.rows_subset(bt.source)), true);
      Var zt = bm.encode(tape.constant(ws.xt.rows_subset(bt.target)), true);
      Var feat_s, feat_t;
      Var cls = losses::softmax_cross_entropy(bm.classify(zs, 1, &feat_s), ys);
      Var ent = losses::entropy_loss(bm.classify(zt, 1, &feat_t));
      Var hs = losses::feature_norms(feat_s);
      Var ht = losses::feature_norms(feat_t);
      Var hs_prev = tape.constant(previous(cache_s, bt.source, hs.value()));
      Var ht_prev = tape.constant(previous(cache_t, bt.target, ht.value()));
      // Expectation over the union S ∪ T of the batch.
      const double ns = static_cast<double>(bt.source.size());
      const double nt = static_cast<double>(bt.target.size());
      Var norm_loss = ad::add(ad::scale(losses::safn_feature_norm(hs_prev, hs, w.delta_r), ns / (ns + nt)),
                              ad::scale(losses::safn_feature_norm(ht_prev, ht, w.delta_r), nt / (ns + nt)));
      Var kld = losses::kld_to_prior(zs, kTrainVarianceFloor);
      Var zn = tape.constant(prior.sample(bt.target.size()));
      Var dal = losses::dal(bm.decode(zt, true), bm.decode(zn, true));
      Var total = ad::add(ad::add(ad::add(cls, ent), ad::scale(norm_loss, w.kappa)),
                          ad::add(ad::scale(kld, w.alpha), ad::scale(dal, w.beta)));
      tape.backward(total);
      notify(observer, Phase::kStep, false, it, ep, m);
      opt.step(bm, model::kAllGroups);
      notify(observer, Phase::kStep, true, it, ep, m);
      // Store this iteration's norms as the next visit's h(x; θ_p).
      double norm_sum = 0.0;
      for (std::size_t i = 0; i < bt.source.size(); ++i) {
        cache_s[bt.source[i]] = hs.value()[i];
        norm_sum += hs.value()[i];
      }
      for (std::size_t i = 0; i < bt.target.size(); ++i) {
        cache_t[bt.target[i]] = ht.value()[i];
        norm_sum += ht.value()[i];
      }
      acc.add({total.item(), cls.item(), ent.item(), kld.item(), dal.item(), norm_loss.item(),
               norm_sum / (ns + nt)});
      ++it;
    }
    auto row = acc.means();
    row.push_back(eval_accuracy(m, data));
    report.add_row(std::move(row), seconds_since(t0));
  }
  report.summary["variant"] = variant_name(c.variant);
  report.summary["iterations"] = it;
  report.summary["target_accuracy"] = report.last("target_accuracy");
  return {std::move(m), std::move(report), std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------
// DAL-only alignment on unlabeled 2D domains

namespace {

/// decode(encode(x)) over the whole set with batch statistics, no update.
Tensor predict_batch_stats(ModelBundle& m, const Tensor& x) {
  Tape tape;
  BoundModel bm(m, tape, 0);
  return bm.decode(bm.encode(tape.constant(x), true), true).value();
}

}  // namespace

TrainResult train_dal_only(const Tensor& source_points, const Tensor& target_points,
                           const TrainConfig& cfg, const StepObserver& observer) {
  TrainConfig c = cfg;
  c.variant = Variant::kDalOnly;
  c.batch = std::min(c.batch, std::max(source_points.rows(), target_points.rows()));
  c.validate();
  if (source_points.cols() != model::kInputDim || target_points.cols() != model::kInputDim)
    throw ShapeError("train_dal_only: points must be N×2");
  Workspace ws = prepare(source_points, target_points, nullptr, c.decoder_final);
  model::ModelOptions mo;
  mo.decoder_final = c.decoder_final;
  ModelBundle m = ModelBundle::create(mo, c.seed);
  Optimizer opt(c.optimizer, c.lr);
  EpochBatcher batcher(ws.xs.rows(), ws.xt.rows(), c.batch, c.seed, true);

  auto to_input_space = [&](Tensor t) { return ws.transform ? ws.transform->invert(t) : t; };
  auto predict = [&] { return to_input_space(predict_batch_stats(m, ws.xt)); };

  TrainResult res{ModelBundle{}, RunReport({"loss_dal", "mean_gap", "cov_gap"}), std::nullopt,
                  std::nullopt};
  RunReport& report = res.report;
  report.seed = c.seed;
  report.config = c.to_json();
  res.initial_prediction = predict();
  const auto t0 = Clock::now();
  std::size_t it = 0;
  for (std::size_t ep = 1; ep <= c.epochs; ++ep) {
    EpochAccumulator acc(1);
    Tensor last_pred;
    for (const auto& bt : batcher.next_epoch()) {
      Tape tape;
      BoundModel bm(m, tape, model::kEncoder | model::kDecoder);
      Var pred = bm.decode(bm.encode(tape.constant(ws.xt.rows_subset(bt.target)), true), true);
      Var loss = losses::dal(pred, tape.constant(ws.xs.rows_subset(bt.source)));
      tape.backward(loss);
      notify(observer, Phase::kStep, false, it, ep, m);
      opt.step(bm, model::kEncoder | model::kDecoder);
      notify(observer, Phase::kStep, true, it, ep, m);
      acc.add({loss.item()});
      last_pred = pred.value();
      ++it;
    }
    // Moment gaps of the last batch's predictions (full-batch runs: every point).
    const auto gap = metrics::moment_distance(to_input_space(last_pred), source_points);
    report.add_row({acc.means()[0], gap.mean_gap, gap.cov_gap}, seconds_since(t0));
  }
  res.final_prediction = predict();
  const auto g0 = metrics::moment_distance(*res.initial_prediction, source_points);
  const auto g1 = metrics::moment_distance(*res.final_prediction, source_points);
  const double e0 = metrics::energy_distance(*res.initial_prediction, source_points);
  const double e1 = metrics::energy_distance(*res.final_prediction, source_points);
  report.summary["variant"] = "dal_only";
  report.summary["iterations"] = it;
  report.summary["initial_mean_gap"] = g0.mean_gap;
  report.summary["final_mean_gap"] = g1.mean_gap;
  report.summary["initial_cov_gap"] = g0.cov_gap;
  report.summary["final_cov_gap"] = g1.cov_gap;
  report.summary["initial_energy_distance"] = e0;
  report.summary["final_energy_distance"] = e1;
  report.summary["energy_reduction"] = e0 > 0.0 ? 1.0 - e1 / e0 : 0.0;
  // The same quantities for the untouched target points, i.e. the domain gap
  // before any mapping at all.
  const auto gin = metrics::moment_distance(target_points, source_points);
  const double ein = metrics::energy_distance(target_points, source_points);
  report.summary["input_mean_gap"] = gin.mean_gap;
  report.summary["input_cov_gap"] = gin.cov_gap;
  report.summary["input_energy_distance"] = ein;
  report.summary["energy_reduction_vs_input"] = ein > 0.0 ? 1.0 - e1 / ein : 0.0;
  res.model = std::move(m);
  return res;
}

TrainResult train(const data::DomainPair& data, const TrainConfig& cfg, const StepObserver& observer) {
  switch (cfg.variant) {
    case Variant::kDfaMcd:
      return train_dfa_mcd(data, cfg, observer);
    case Variant::kDfaSafn:
      return train_dfa_safn(data, cfg, observer);
    case Variant::kDalOnly:
      return train_dal_only(data.source_points(), data.target_points(), cfg, observer);
    default:
      return train_dfa_ent(data, cfg, observer);
  }
}

}  // namespace gla::train
