#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gla/datasets.hpp"
#include "gla/losses.hpp"
#include "gla/model.hpp"
#include "gla/optimizer.hpp"
#include "gla/report.hpp"

namespace gla::train {

enum class Variant {
  kSourceOnly,   // L_cls
  kSourceEnt,    // L_cls + L_ent
  kDfaEnt,       // L_cls + L_ent + α L_kld + β L_dal
  kDfaMcd,
  kDfaSafn,
  kDalOnly,
  // Alignment ablations; all keep L_cls, L_ent and α L_kld(source).
  kAblationUntied,      // 2: DFA-ENT with an untied decoder
  kAblationKldTarget,   // 3: β KL(target ‖ prior) in place of L_dal
  kAblationDalDirect,   // 4: β L_daldir
  kAblationKldDirect,   // 5: β L_klddir
  kAblationKldDirRecon, // 6: β L_klddir + L_recon(source) + L_recon(target)
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct TrainConfig {
  losses::LossWeights weights;  // α 0.01, β 10, κ 0.05, δr 1
  double lr = 2e-4;
  std::size_t batch = 128;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t mcd_inner_n = 4;
  Variant variant = Variant::kDfaEnt;
  model::FinalActivation decoder_final = model::FinalActivation::kNone;

  /// Throws std::invalid_argument on lr ≤ 0, batch < 2, mcd_inner_n < 1 or
  /// invalid loss weights.
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// Hyperparameter presets.
TrainConfig digit_preset();      // Adam, lr 2e-4, batch 128, α 0.01, β 10, n = 4
TrainConfig object_preset();     // SGD, lr 1e-3, batch 32, α 0.1, β 10
TrainConfig synthetic_preset();  // DAL only: Adam, lr 1e-3, full batch 500, 2000 iterations

enum class Phase { kStep, kMcdStep1, kMcdStep2, kMcdStep3 };

struct StepEvent {
  Phase phase;
  bool after;  // false: before the update, true: after it
  std::size_t iteration;
  std::size_t epoch;
  const model::ModelBundle& model;
};

/// Optional instrumentation; called around every optimizer update.
using StepObserver = std::function<void(const StepEvent&)>;

struct TrainResult {
  model::ModelBundle model;
  RunReport report;
  /// dal_only: scatter snapshots in input coordinates.
  std::optional<Tensor> initial_prediction;
  std::optional<Tensor> final_prediction;
};

TrainResult train_dfa_ent(const data::DomainPair& data, const TrainConfig& cfg,
                          const StepObserver& observer = {});
TrainResult train_dfa_mcd(const data::DomainPair& data, const TrainConfig& cfg,
                          const StepObserver& observer = {});
TrainResult train_dfa_safn(const data::DomainPair& data, const TrainConfig& cfg,
                           const StepObserver& observer = {});
/// L_dal between decode(encode(x_t)) and the raw source points, paired by
/// row index. `cfg.batch` is clamped to the domain size.
TrainResult train_dal_only(const Tensor& source_points, const Tensor& target_points,
                           const TrainConfig& cfg, const StepObserver& observer = {});

/// Dispatches on cfg.variant.
TrainResult train(const data::DomainPair& data, const TrainConfig& cfg,
                  const StepObserver& observer = {});

/// Points as the model sees them. With a ReLU-terminated decoder both domains
/// pass through one shift-to-non-negative transform fitted on their union;
/// otherwise the raw points.
Tensor model_input(const model::ModelBundle& m, const data::DomainPair& data, bool target);

/// Target accuracy with batchnorm in eval mode; averages both heads' softmax
/// when the model has two.
double target_accuracy(model::ModelBundle& m, const data::DomainPair& data);

struct AblationRow {
  int id;  // 1..6
  Variant variant;
  double target_accuracy;
};

/// The six alignment variants, numbered 1..6. `ids` selects a subset; an
/// unknown id throws std::invalid_argument. `jobs` > 1 runs variants on
/// separate threads.
std::vector<AblationRow> run_ablation_suite(const data::DomainPair& data, const TrainConfig& cfg,
                                            std::vector<int> ids = {1, 2, 3, 4, 5, 6},
                                            std::size_t jobs = 1);
Variant ablation_variant(int id);

struct SweepPoint {
  double alpha;
  double beta;
  double target_accuracy;
};

/// One DFA-ENT run per (α, β) grid point.
std::vector<SweepPoint> sensitivity_sweep(const data::DomainPair& data,
                                          const std::vector<double>& alphas,
                                          const std::vector<double>& betas, const TrainConfig& cfg,
                                          std::size_t jobs = 1);

}  // namespace gla::train
