#include <doctest.h>

#include <cmath>

#include "sgdf/core/rng.hpp"
#include "sgdf/noise/noise_sim.hpp"

using namespace sgdf;

namespace {

// One big constant image gives 10^n iid draws of the same conditional
// distribution, so sample moments can be compared to alpha*I + sigma^2.
void check_moments(double clean, double alpha, double sigma, int n, double tol,
                   std::uint64_t seed) {
    Image img(Shape{n / 500, 500, 1});
    img.fill(static_cast<float>(clean));
    const Image noisy = noise::degrade(img, {alpha, sigma, seed});
    double mean = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) mean += noisy[i];
    mean /= static_cast<double>(noisy.size());
    double var = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const double d = noisy[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(noisy.size() - 1);

    const double want_var = alpha * clean + sigma * sigma;
    INFO("clean=", clean, " alpha=", alpha, " sigma=", sigma);
    CHECK(std::abs(mean - clean) < tol * std::max(clean, 0.05));
    CHECK(std::abs(var - want_var) < tol * want_var);
}

}  // namespace

TEST_CASE("degrade is deterministic in the seed") {
    Image img(Shape{8, 8, 3});
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = static_cast<float>(i) / static_cast<float>(img.size());
    const Image a = noise::degrade(img, {0.01, 0.1, 42});
    const Image b = noise::degrade(img, {0.01, 0.1, 42});
    const Image c = noise::degrade(img, {0.01, 0.1, 43});
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(max_abs_diff(a, c) > 0.0);
}

TEST_CASE("zero noise returns the input untouched") {
    Image img(Shape{4, 4, 1});
    img.fill(0.25f);
    CHECK(max_abs_diff(noise::degrade(img, {0.0, 0.0, 7}), img) == 0.0);
}

TEST_CASE("sample moments match alpha*I + sigma^2") {
    // 5% tolerance at 2*10^5 draws; the acceptance gate re-runs at 10^6 / 2%.
    const int n = 200000;
    check_moments(0.5, 0.0, 0.2, n, 0.05, 11);
    check_moments(0.5, 0.02, 0.0, n, 0.05, 12);
    check_moments(0.25, 0.02, 0.2, n, 0.05, 13);
    check_moments(1.0, 0.01, 0.05, n, 0.05, 14);
}

TEST_CASE("gaussian-only noise has symmetric spread around the signal") {
    Image img(Shape{100, 500, 1});
    img.fill(0.5f);
    const Image noisy = noise::degrade(img, {0.0, 0.2, 21});
    int below = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i)
        if (noisy[i] < 0.5f) ++below;
    const double frac = static_cast<double>(below) / static_cast<double>(noisy.size());
    CHECK(frac > 0.47);
    CHECK(frac < 0.53);
    // unclipped: sigma=0.2 at mid-gray must leave the [0,1] range sometimes
    CHECK(noisy.min() < 0.0f);
    CHECK(noisy.max() > 1.0f);
}

TEST_CASE("poisson-only output is quantized to multiples of alpha") {
    Image img(Shape{50, 50, 1});
    img.fill(0.3f);
    const double alpha = 0.02;
    const Image noisy = noise::degrade(img, {alpha, 0.0, 33});
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const double k = noisy[i] / alpha;
        CHECK(std::abs(k - std::round(k)) < 1e-4);
        CHECK(noisy[i] >= 0.0f);
    }
}

TEST_CASE("black input stays black under pure poisson noise") {
    Image img(Shape{16, 16, 1});
    const Image noisy = noise::degrade(img, {0.02, 0.0, 5});
    CHECK(noisy.min() == 0.0f);
    CHECK(noisy.max() == 0.0f);
}

TEST_CASE("parameter and range validation") {
    Image img(Shape{2, 2, 1});
    img.fill(0.5f);
    CHECK_THROWS_AS(noise::degrade(img, {-0.01, 0.1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(noise::degrade(img, {0.01, -0.1, 0}), std::invalid_argument);
    img[2] = 1.5f;
    CHECK_THROWS_AS(noise::degrade(img, {0.0, 0.1, 0}), std::invalid_argument);
    img[2] = -0.5f;
    CHECK_THROWS_AS(noise::degrade(img, {0.0, 0.1, 0}), std::invalid_argument);
}

TEST_CASE("channels draw independent noise") {
    Image img(Shape{32, 32, 3});
    img.fill(0.5f);
    const Image noisy = noise::degrade(img, {0.0, 0.2, 77});
    double d01 = 0, d02 = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            d01 = std::max(d01, static_cast<double>(std::abs(noisy.at(y, x, 0) - noisy.at(y, x, 1))));
            d02 = std::max(d02, static_cast<double>(std::abs(noisy.at(y, x, 0) - noisy.at(y, x, 2))));
        }
    CHECK(d01 > 1e-3);
    CHECK(d02 > 1e-3);
}

TEST_CASE("sampled noise parameters stay inside the training ranges") {
    auto rng = core::make_engine(123);
    bool upper_alpha = false, upper_sigma = false;
    for (int i = 0; i < 2000; ++i) {
        const noise::NoiseParams p = noise::sample_noise_params(rng);
        CHECK(p.alpha >= 0.0);
        CHECK(p.alpha <= noise::kAlphaMax);
        CHECK(p.sigma >= 0.0);
        CHECK(p.sigma <= noise::kSigmaMax);
        upper_alpha = upper_alpha || p.alpha > 0.9 * noise::kAlphaMax;
        upper_sigma = upper_sigma || p.sigma > 0.9 * noise::kSigmaMax;
    }
    CHECK(upper_alpha);  // the upper decades are actually reached
    CHECK(upper_sigma);

    auto r1 = core::make_engine(5);
    auto r2 = core::make_engine(5);
    const auto a = noise::sample_noise_params(r1);
    const auto b = noise::sample_noise_params(r2);
    CHECK(a.alpha == b.alpha);
    CHECK(a.sigma == b.sigma);
    CHECK(a.seed == b.seed);
}
