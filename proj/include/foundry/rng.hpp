#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "foundry/tensor.hpp"

namespace foundry {

/// All randomness in the project flows from one root seed through named
/// sub-streams (data, init, gumbel, sampling, ...), so components can be
/// re-seeded independently without perturbing each other.
std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name);

/// Uniform double in [0, 1). Hand-rolled from raw engine output so results
/// are stable across standard library implementations.
double uniform01(std::mt19937_64& rng);

/// Uniform double in [lo, hi).
double uniform(std::mt19937_64& rng, double lo, double hi);

/// Standard normal via Box-Muller (deterministic given the engine state).
double normal(std::mt19937_64& rng);

/// Truncated normal: N(0, sigma^2) resampled until |x| <= 2*sigma.
/// Note the effective standard deviation is ~0.88*sigma.
double trunc_normal(std::mt19937_64& rng, double sigma);

Tensor trunc_normal_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double sigma);

/// Gumbel(0,1) sample: -log(-log(u)).
double gumbel(std::mt19937_64& rng);

/// Fisher-Yates sample of k distinct indices from [0, n), order preserved
/// option handled by callers.
std::vector<std::size_t> sample_without_replacement(std::mt19937_64& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace foundry
