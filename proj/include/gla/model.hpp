#pragma once

// Encoder G (FC-56, ReLU, FC-128, ReLU, FC-256, ReLU, BatchNorm), a decoder D
// that reuses G's weight matrices transposed, and small classifier heads.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gla/autodiff.hpp"
#include "gla/rng.hpp"
#include "gla/tensor.hpp"

namespace gla::model {

inline constexpr std::size_t kInputDim = 2;
inline constexpr std::size_t kLatentDim = 256;
inline constexpr std::array<std::size_t, 3> kEncoderWidths{56, 128, 256};
inline constexpr std::size_t kClassifierHidden = 64;

struct Parameter {
  std::string name;
  Tensor value;
};

/// y = act(x · Wᵀ + b) with W stored out×in.
struct DenseLayer {
  Parameter weight;
  Parameter bias;  // 1×out
};

struct BatchNorm {
  Parameter gamma;  // 1×width
  Parameter beta;   // 1×width
  ad::BatchNormStats stats;
};

struct Classifier {
  DenseLayer hidden;  // 64×256, ReLU
  DenseLayer out;     // C×64, linear
};

enum class FinalActivation { kNone, kRelu };
std::string final_activation_name(FinalActivation a);
FinalActivation final_activation_from_name(const std::string& s);

struct ModelOptions {
  std::size_t num_classes = 2;
  FinalActivation decoder_final = FinalActivation::kNone;
  bool tied = true;
  bool two_heads = false;
};

/// Parameter groups, used to freeze components during a step.
enum Group : unsigned {
  kEncoder = 1u << 0,  // θ_g, including the weights the decoder reads transposed
  kDecoder = 1u << 1,  // decoder biases, decoder batchnorm, untied decoder weights
  kHead1 = 1u << 2,
  kHead2 = 1u << 3,
  kAllGroups = kEncoder | kDecoder | kHead1 | kHead2,
};

class ModelBundle {
 public:
  /// He-normal weights (std √(2/fan_in)), zero biases, unit batchnorm scale.
  static ModelBundle create(const ModelOptions& opt, std::uint64_t seed);

  const ModelOptions& options() const noexcept { return opt_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::array<DenseLayer, 3> encoder;
  BatchNorm encoder_bn;
  /// Decoder stage k (0: 256→128, 1: 128→56, 2: 56→2) has its own bias.
  std::array<Parameter, 3> decoder_bias;
  /// Only populated when untied; stage k has the shape of encoder[2 − k].weight.
  std::array<Parameter, 3> decoder_weight;
  BatchNorm decoder_bn;
  Classifier head1;
  std::optional<Classifier> head2;

  /// Trainable parameters in declaration order, tagged with their group.
  std::vector<std::pair<Parameter*, Group>> parameters();
  std::vector<std::pair<const Parameter*, Group>> parameters() const;
  /// Every persisted tensor (parameters plus batchnorm running statistics),
  /// in checkpoint order.
  std::vector<std::pair<std::string, Tensor*>> state();

  std::size_t parameter_count(unsigned groups) const;

  /// Weight the decoder uses at stage k (transposed view of the encoder when tied).
  const Tensor& decoder_stage_weight(std::size_t stage) const;
  /// True when every decoder weight view equals its encoder weight bit for bit.
  bool tying_holds() const;

 private:
  ModelOptions opt_;
  std::uint64_t seed_ = 0;
};

/// Intermediate values the encoder exposes for inspection.
struct EncodeTaps {
  ad::Var preactivation;  // FC-256 output before its ReLU
};

/// A model bound to one tape for one step: each parameter is registered once
/// as a leaf, so repeated uses (two domains, tied transposes) accumulate.
class BoundModel {
 public:
  /// `trainable` selects which groups receive gradients; frozen groups are
  /// read as constants and their batchnorm running statistics are not updated.
  BoundModel(ModelBundle& model, ad::Tape& tape, unsigned trainable = kAllGroups);

  /// Training mode uses batch statistics; eval mode uses running statistics.
  ad::Var encode(ad::Var x, bool train, EncodeTaps* taps = nullptr);
  ad::Var decode(ad::Var z, bool train);
  /// Returns logits; `penultimate` receives the hidden ReLU activations.
  ad::Var classify(ad::Var z, int head = 1, ad::Var* penultimate = nullptr);

  ad::Var var(const Parameter& p) const { return vars_.at(&p); }
  /// Reads `p` through `v` (same tape, same shape) instead of its own leaf;
  /// gradient checks use this to differentiate w.r.t. externally owned copies.
  void rebind(const Parameter& p, ad::Var v);
  const Tensor& grad(const Parameter& p) const { return tape_.grad(var(p)); }
  ad::Tape& tape() { return tape_; }
  ModelBundle& model() { return model_; }
  bool trainable(Group g) const { return (trainable_ & g) != 0; }

 private:
  ad::Var dense(const DenseLayer& l, ad::Var x);
  ad::Var batchnorm(BatchNorm& bn, Group g, ad::Var x, bool train);

  ModelBundle& model_;
  ad::Tape& tape_;
  unsigned trainable_;
  std::unordered_map<const Parameter*, ad::Var> vars_;
};

// Tape-free conveniences; batchnorm runs in eval mode.
Tensor encode(ModelBundle& m, const Tensor& x);
Tensor decode(ModelBundle& m, const Tensor& z);
Tensor classify(ModelBundle& m, const Tensor& z, int head = 1);
/// Encoder FC-256 pre-activation values (eval mode).
Tensor encoder_preactivation(ModelBundle& m, const Tensor& x);

/// Fresh i.i.d. N(0, 1) latent batches from a dedicated stream.
class PriorSampler {
 public:
  explicit PriorSampler(std::uint64_t seed, std::size_t dim = kLatentDim)
      : rng_(make_rng(seed, Stream::kPrior)), dim_(dim) {}
  Tensor sample(std::size_t m);
  std::size_t dim() const noexcept { return dim_; }

 private:
  Rng rng_;
  std::size_t dim_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

/// Manifest text, a `---` line, then every state tensor as little-endian
/// float64 in state() order. See docs/checkpoint-format.md.
void save_checkpoint(ModelBundle& m, const std::filesystem::path& path,
                     std::uint64_t config_hash = 0);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace gla::model
