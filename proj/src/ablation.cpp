#include <future>
#include <stdexcept>

#include "gla/training.hpp"

namespace gla::train {

namespace {

/// Runs `n` independent tasks with at most `jobs` in flight; results keep
/// submission order.
template <class R, class F>
std::vector<R> run_bounded(std::size_t n, std::size_t jobs, F task) {
  std::vector<R> out(n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = task(i);
    return out;
  }
  for (std::size_t start = 0; start < n; start += jobs) {
    std::vector<std::future<R>> wave;
    for (std::size_t i = start; i < std::min(n, start + jobs); ++i)
      wave.push_back(std::async(std::launch::async, task, i));
    for (std::size_t i = 0; i < wave.size(); ++i) out[start + i] = wave[i].get();
  }
  return out;
}

}  // namespace

Variant ablation_variant(int id) {
  switch (id) {
    case 1: return Variant::kDfaEnt;
    case 2: return Variant::kAblationUntied;
    case 3: return Variant::kAblationKldTarget;
    case 4: return Variant::kAblationDalDirect;
    case 5: return Variant::kAblationKldDirect;
    case 6: return Variant::kAblationKldDirRecon;
    default: throw std::invalid_argument("unknown ablation variant id " + std::to_string(id));
  }
}

std::vector<AblationRow> run_ablation_suite(const data::DomainPair& data, const TrainConfig& cfg,
                                            std::vector<int> ids, std::size_t jobs) {
  for (int id : ids) ablation_variant(id);
  return run_bounded<AblationRow>(ids.size(), jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.variant = ablation_variant(ids[i]);
    auto r = train_dfa_ent(data, c);
    return AblationRow{ids[i], c.variant, r.report.last("target_accuracy")};
  });
}

std::vector<SweepPoint> sensitivity_sweep(const data::DomainPair& data,
                                          const std::vector<double>& alphas,
                                          const std::vector<double>& betas, const TrainConfig& cfg,
                                          std::size_t jobs) {
  if (alphas.empty() || betas.empty())
    throw std::invalid_argument("sensitivity_sweep: empty grid");
  std::vector<std::pair<double, double>> grid;
  for (double a : alphas)
    for (double b : betas) grid.emplace_back(a, b);
  return run_bounded<SweepPoint>(grid.size(), jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.variant = Variant::kDfaEnt;
    c.weights.alpha = grid[i].first;
    c.weights.beta = grid[i].second;
    auto r = train_dfa_ent(data, c);
    return SweepPoint{grid[i].first, grid[i].second, r.report.last("target_accuracy")};
  });
}

}  // namespace gla::train
