#pragma once
// Experiment configuration: a JSON document layered over a hyperparameter
// preset, plus command-line and environment overrides.
//
//   {
//     "preset": "digit" | "object" | "synthetic",
//     "seed": 0, "out": "runs/x", "jobs": 1,
//     "metrics": ["feature_distance", "latent_moments", "latent_histogram"],
//     "train": { "variant": "dfa_ent", "alpha": 0.01, "beta": 10, "kappa": 0.05,
//                "delta_r": 1, "lr": 2e-4, "batch": 128, "epochs": 300,
//                "optimizer": "adam", "mcd_inner_n": 4, "decoder_final": "none" },
//     "data": { "synthetic": "gauss_same_cov", "n": 500 }
//          or { "task": "moons", "n": 500, "angle_deg": 30, "translation": [0, 0],
//               "scale": 1, "pivot": [0.5, 0.25] }
//          or { "csv": "points.csv" },
//     "ablation": { "variants": [1, 2, 3, 4, 5, 6], "seeds": [0, 1, 2],
//                   "sweep": { "alphas": [...], "betas": [...] } },
//     "gradcheck": { "seeds": 20, "corrupt": "sum_all" }
//   }
//
// Unknown keys at any level are rejected.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "gla/autodiff.hpp"
#include "gla/datasets.hpp"
#include "gla/training.hpp"

namespace gla::cli {

/// Usage or configuration problem; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { kSynthetic, kAdapt, kAblation, kGradcheck, kReport };
Command command_from_name(const std::string& s);
std::string command_name(Command c);

struct DataSpec {
  std::optional<data::SyntheticPreset> synthetic;
  data::TaskKind task = data::TaskKind::kMoons;
  data::Shift shift{30.0, {0.0, 0.0}, 1.0, std::nullopt};
  std::size_t n = 500;
  std::optional<std::filesystem::path> csv;
};

struct ExperimentConfig {
  Command command = Command::kAdapt;
  std::string preset;
  train::TrainConfig train;
  DataSpec data;
  std::filesystem::path out_dir;  // run directory to read, for `report`
  std::size_t jobs = 1;
  std::vector<std::string> metrics;
  std::vector<int> ablation_ids{1, 2, 3, 4, 5, 6};
  std::vector<std::uint64_t> seeds;  // ablation: empty means {train.seed}
  std::vector<double> sweep_alphas, sweep_betas;
  std::size_t gradcheck_seeds = 20;
  std::optional<ad::Op> corrupt_op;

  /// Fully resolved configuration, written as config_echo.json.
  nlohmann::ordered_json to_json() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> jobs;
};

/// Seed precedence: --seed, then GLA_SEED (`env_seed`), then the document.
/// Relative data paths resolve against `base_dir`. Throws ConfigError.
ExperimentConfig parse_config(Command cmd, const nlohmann::json& doc, const Overrides& ov,
                              const char* env_seed, const std::filesystem::path& base_dir = {});

/// Reads `file` (if any) and parses it; GLA_SEED comes from the environment.
ExperimentConfig load_config(Command cmd, const std::optional<std::filesystem::path>& file,
                             const Overrides& ov);

/// Checks that every path the command will touch is usable, before any work.
void validate_paths(const ExperimentConfig& cfg);

std::uint64_t parse_seed(const std::string& text, const char* what);

}  // namespace gla::cli
