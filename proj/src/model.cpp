#include "gla/model.hpp"

#include <cmath>

namespace gla::model {

using ad::Var;

namespace {

Parameter he_weight(std::string name, std::size_t out, std::size_t in, Rng& rng) {
  return {std::move(name), normal_tensor(rng, out, in, 0.0, std::sqrt(2.0 / static_cast<double>(in)))};
}

Parameter zeros(std::string name, std::size_t width) { return {std::move(name), Tensor(1, width)}; }

BatchNorm make_bn(const std::string& prefix, std::size_t width) {
  return {{prefix + ".gamma", Tensor(1, width, 1.0)}, zeros(prefix + ".beta", width),
          ad::BatchNormStats(width)};
}

DenseLayer make_dense(const std::string& prefix, std::size_t out, std::size_t in, Rng& rng) {
  return {he_weight(prefix + ".weight", out, in, rng), zeros(prefix + ".bias", out)};
}

Classifier make_head(const std::string& prefix, std::size_t classes, Rng& rng) {
  return {make_dense(prefix + ".hidden", kClassifierHidden, kLatentDim, rng),
          make_dense(prefix + ".out", classes, kClassifierHidden, rng)};
}

}  // namespace

std::string final_activation_name(FinalActivation a) {
  return a == FinalActivation::kRelu ? "relu" : "none";
}

FinalActivation final_activation_from_name(const std::string& s) {
  if (s == "relu") return FinalActivation::kRelu;
  if (s == "none") return FinalActivation::kNone;
  throw std::invalid_argument("unknown decoder final activation '" + s + "'");
}

ModelBundle ModelBundle::create(const ModelOptions& opt, std::uint64_t seed) {
  if (opt.num_classes < 1) throw std::invalid_argument("model: num_classes must be >= 1");
  ModelBundle m;
  m.opt_ = opt;
  m.seed_ = seed;
  Rng rng = make_rng(seed, Stream::kInit);
  std::size_t in = kInputDim;
  for (std::size_t i = 0; i < 3; ++i) {
    m.encoder[i] = make_dense("encoder." + std::to_string(i), kEncoderWidths[i], in, rng);
    in = kEncoderWidths[i];
  }
  m.encoder_bn = make_bn("encoder_bn", kLatentDim);
  const std::array<std::size_t, 3> dec_out{kEncoderWidths[1], kEncoderWidths[0], kInputDim};
  for (std::size_t k = 0; k < 3; ++k) {
    m.decoder_bias[k] = zeros("decoder." + std::to_string(k) + ".bias", dec_out[k]);
    if (!opt.tied)
      m.decoder_weight[k] = {"decoder." + std::to_string(k) + ".weight",
                             m.encoder[2 - k].weight.value};
  }
  m.decoder_bn = make_bn("decoder_bn", kEncoderWidths[1]);
  m.head1 = make_head("head1", opt.num_classes, rng);
  if (opt.two_heads) m.head2 = make_head("head2", opt.num_classes, rng);
  return m;
}

std::vector<std::pair<Parameter*, Group>> ModelBundle::parameters() {
  std::vector<std::pair<Parameter*, Group>> ps;
  for (auto& l : encoder) {
    ps.emplace_back(&l.weight, kEncoder);
    ps.emplace_back(&l.bias, kEncoder);
  }
  ps.emplace_back(&encoder_bn.gamma, kEncoder);
  ps.emplace_back(&encoder_bn.beta, kEncoder);
  for (std::size_t k = 0; k < 3; ++k) {
    if (!opt_.tied) ps.emplace_back(&decoder_weight[k], kDecoder);
    ps.emplace_back(&decoder_bias[k], kDecoder);
  }
  ps.emplace_back(&decoder_bn.gamma, kDecoder);
  ps.emplace_back(&decoder_bn.beta, kDecoder);
  auto add_head = [&](Classifier& h, Group g) {
    ps.emplace_back(&h.hidden.weight, g);
    ps.emplace_back(&h.hidden.bias, g);
    ps.emplace_back(&h.out.weight, g);
    ps.emplace_back(&h.out.bias, g);
  };
  add_head(head1, kHead1);
  if (head2) add_head(*head2, kHead2);
  return ps;
}

std::vector<std::pair<const Parameter*, Group>> ModelBundle::parameters() const {
  std::vector<std::pair<const Parameter*, Group>> out;
  for (auto [p, g] : const_cast<ModelBundle*>(this)->parameters()) out.emplace_back(p, g);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ModelBundle::state() {
  std::vector<std::pair<std::string, Tensor*>> s;
  for (auto [p, g] : parameters()) {
    s.emplace_back(p->name, &p->value);
    if (p == &encoder_bn.beta) {
      s.emplace_back("encoder_bn.running_mean", &encoder_bn.stats.running_mean);
      s.emplace_back("encoder_bn.running_var", &encoder_bn.stats.running_var);
    }
    if (p == &decoder_bn.beta) {
      s.emplace_back("decoder_bn.running_mean", &decoder_bn.stats.running_mean);
      s.emplace_back("decoder_bn.running_var", &decoder_bn.stats.running_var);
    }
  }
  return s;
}

std::size_t ModelBundle::parameter_count(unsigned groups) const {
  std::size_t n = 0;
  for (auto [p, g] : parameters())
    if (groups & g) n += p->value.size();
  return n;
}

const Tensor& ModelBundle::decoder_stage_weight(std::size_t stage) const {
  return opt_.tied ? encoder.at(2 - stage).weight.value : decoder_weight.at(stage).value;
}

bool ModelBundle::tying_holds() const {
  for (std::size_t k = 0; k < 3; ++k)
    if (!bitwise_equal(decoder_stage_weight(k), encoder[2 - k].weight.value)) return false;
  return true;
}

BoundModel::BoundModel(ModelBundle& model, ad::Tape& tape, unsigned trainable)
    : model_(model), tape_(tape), trainable_(trainable) {
  for (auto [p, g] : model.parameters())
    vars_.emplace(p, tape.param(p->value, (trainable & g) != 0));
}

void BoundModel::rebind(const Parameter& p, Var v) {
  auto it = vars_.find(&p);
  if (it == vars_.end()) throw std::invalid_argument("rebind: parameter '" + p.name + "' not in model");
  if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
    throw ShapeError("rebind: shape mismatch for '" + p.name + "'");
  it->second = v;
}

Var BoundModel::dense(const DenseLayer& l, Var x) {
  return ad::add_row_bias(ad::matmul_transposed(x, var(l.weight)), var(l.bias));
}

Var BoundModel::batchnorm(BatchNorm& bn, Group g, Var x, bool train) {
  const auto mode = !train ? ad::BatchNormMode::kEval
                   : trainable(g) ? ad::BatchNormMode::kTrain
                                  : ad::BatchNormMode::kTrainFrozen;
  return ad::batchnorm_rows(x, var(bn.gamma), var(bn.beta), &bn.stats, mode);
}

Var BoundModel::encode(Var x, bool train, EncodeTaps* taps) {
  if (x.cols() != kInputDim)
    throw ShapeError("encode: expected width 2, got " + x.value().shape_str());
  Var h = ad::relu(dense(model_.encoder[0], x));
  h = ad::relu(dense(model_.encoder[1], h));
  Var pre = dense(model_.encoder[2], h);
  if (taps) taps->preactivation = pre;
  return batchnorm(model_.encoder_bn, kEncoder, ad::relu(pre), train);
}

Var BoundModel::decode(Var z, bool train) {
  if (z.cols() != kLatentDim)
    throw ShapeError("decode: expected width 256, got " + z.value().shape_str());
  // Stage k multiplies by the encoder weight W (out×in) un-transposed, i.e.
  // by (Wᵀ)ᵀ: the decoder reads the encoder's weights as their transposes.
  auto stage_weight = [&](std::size_t k) {
    return model_.options().tied ? var(model_.encoder[2 - k].weight)
                                 : var(model_.decoder_weight[k]);
  };
  Var h = ad::relu(ad::add_row_bias(ad::matmul(z, stage_weight(0)), var(model_.decoder_bias[0])));
  h = batchnorm(model_.decoder_bn, kDecoder, h, train);
  h = ad::relu(ad::add_row_bias(ad::matmul(h, stage_weight(1)), var(model_.decoder_bias[1])));
  Var out = ad::add_row_bias(ad::matmul(h, stage_weight(2)), var(model_.decoder_bias[2]));
  return model_.options().decoder_final == FinalActivation::kRelu ? ad::relu(out) : out;
}

Var BoundModel::classify(Var z, int head, Var* penultimate) {
  if (z.cols() != kLatentDim)
    throw ShapeError("classify: expected width 256, got " + z.value().shape_str());
  if (head == 2 && !model_.head2) throw std::invalid_argument("classify: model has one head");
  const Classifier& c = head == 2 ? *model_.head2 : model_.head1;
  Var h = ad::relu(dense(c.hidden, z));
  if (penultimate) *penultimate = h;
  return dense(c.out, h);
}

Tensor encode(ModelBundle& m, const Tensor& x) {
  ad::Tape tape;
  BoundModel b(m, tape, 0);
  return b.encode(tape.constant(x), false).value();
}

Tensor decode(ModelBundle& m, const Tensor& z) {
  ad::Tape tape;
  BoundModel b(m, tape, 0);
  return b.decode(tape.constant(z), false).value();
}

Tensor classify(ModelBundle& m, const Tensor& z, int head) {
  ad::Tape tape;
  BoundModel b(m, tape, 0);
  return b.classify(tape.constant(z), head).value();
}

Tensor encoder_preactivation(ModelBundle& m, const Tensor& x) {
  ad::Tape tape;
  BoundModel b(m, tape, 0);
  EncodeTaps taps;
  b.encode(tape.constant(x), false, &taps);
  return taps.preactivation.value();
}

Tensor PriorSampler::sample(std::size_t m) {
  if (m < 1) throw std::invalid_argument("sample_prior: M must be >= 1");
  return normal_tensor(rng_, m, dim_);
}

}  // namespace gla::model
