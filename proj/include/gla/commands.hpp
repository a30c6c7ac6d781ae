#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "gla/config.hpp"

namespace gla::cli {

/// Exit codes: stable contract for scripts and CI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // a check failed, or training/IO failed at runtime
inline constexpr int kExitUsage = 2;        // bad usage or configuration

struct Invocation {
  Command command = Command::kAdapt;
  std::optional<std::filesystem::path> config_file;
  Overrides overrides;
};

/// Loads and validates the configuration, runs the command and maps
/// exceptions to exit codes. Messages go to `err`, tables to `out`.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

data::DomainPair make_task(const DataSpec& spec, std::uint64_t seed);

int cmd_synthetic(const ExperimentConfig& cfg, std::ostream& out);
int cmd_adapt(const ExperimentConfig& cfg, std::ostream& out);
int cmd_ablation(const ExperimentConfig& cfg, std::ostream& out);
int cmd_gradcheck(const ExperimentConfig& cfg, std::ostream& out);
/// Markdown tables from the run directory's summary.json and those of its
/// immediate subdirectories (sorted by name); also written to report.md.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace gla::cli
