#pragma once

#include <cstdint>
#include <random>

#include "sgdf/core/tensor.hpp"

namespace sgdf::noise {

// Poisson-Gaussian degradation parameters on normalized [0,1] intensities.
// alpha scales the signal-dependent (Poisson) part, sigma the Gaussian part:
// Var[noisy | clean] = alpha * clean + sigma^2.
struct NoiseParams {
    double alpha = 0.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr double kAlphaMax = 0.02;
inline constexpr double kSigmaMax = 0.2;

// Applies alpha * Poisson(clean / alpha) + sigma * N(0,1) element-wise.
// alpha == 0 skips the Poisson branch (the limit is the identity on the mean).
// Output is not clipped; draws are per-element, so multi-channel images get
// independent per-channel noise. Deterministic given params.seed.
Image degrade(const Image& clean, const NoiseParams& params);

// Draws alpha ~ U[0, 0.02], sigma ~ U[0, 0.2] and a fresh degradation seed
// from the given stream.
NoiseParams sample_noise_params(std::mt19937_64& rng);

}  // namespace sgdf::noise
