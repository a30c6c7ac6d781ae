#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "gla/tensor.hpp"

namespace gla {

/// Named random sub-streams derived from a single run seed, so that data,
/// initialization, batching and prior sampling can vary independently.
enum class Stream : std::uint64_t {
  kData = 1,
  kTargetData = 2,
  kInit = 3,
  kBatching = 4,
  kPrior = 5,
  kEval = 6,
};

using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, Stream stream);
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

/// rows×cols i.i.d. N(mean, std²) draws, filled row-major.
Tensor normal_tensor(Rng& rng, std::size_t rows, std::size_t cols, double mean = 0.0,
                     double std = 1.0);

/// FNV-1a, used for config fingerprints.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace gla
