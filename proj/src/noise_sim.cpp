#include "sgdf/noise/noise_sim.hpp"

#include "sgdf/core/rng.hpp"

#include <stdexcept>
#include <string>

namespace sgdf::noise {

namespace {
constexpr double kRangeTol = 1e-6;
}

Image degrade(const Image& clean, const NoiseParams& params) {
    if (params.alpha < 0.0 || params.sigma < 0.0)
        throw std::invalid_argument("degrade: alpha and sigma must be non-negative");
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double x = clean[i];
        if (x < -kRangeTol || x > 1.0 + kRangeTol)
            throw std::invalid_argument("degrade: input value " + std::to_string(x) +
                                        " outside [0,1] at flat index " + std::to_string(i));
    }

    if (params.alpha == 0.0 && params.sigma == 0.0) return clean;

    Image out(clean.shape());
    std::mt19937_64 rng = core::make_engine(params.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        double y = clean[i];
        if (params.alpha > 0.0) {
            const double mean = std::max(0.0, static_cast<double>(clean[i])) / params.alpha;
            if (mean > 0.0) {
                std::poisson_distribution<long long> pois(mean);
                y = params.alpha * static_cast<double>(pois(rng));
            } else {
                y = 0.0;
            }
        }
        if (params.sigma > 0.0) y += params.sigma * gauss(rng);
        out[i] = static_cast<float>(y);
    }
    return out;
}

NoiseParams sample_noise_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ua(0.0, kAlphaMax);
    std::uniform_real_distribution<double> us(0.0, kSigmaMax);
    NoiseParams p;
    p.alpha = ua(rng);
    p.sigma = us(rng);
    p.seed = rng();
    return p;
}

}  // namespace sgdf::noise
