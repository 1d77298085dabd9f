#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "sgdf/core/rng.hpp"
#include "sgdf/data/dataset.hpp"
#include "sgdf/data/image_io.hpp"
#include "sgdf/data/synth.hpp"
#include "support/oracles.hpp"

using namespace sgdf;

namespace {

// Mirrors the documented layer-rectangle derivation so the independent winner
// and occlusion rules below can be evaluated on the same geometry.
oracles::SceneRects layer_rects(const data::SceneSpec& spec) {
    oracles::SceneRects s;
    s.disp = spec.layer_disparities;
    const int h = spec.height;
    const int wx = spec.width + spec.max_disparity;
    s.rect.push_back({0, h, 0, wx});
    for (int l = 1; l < static_cast<int>(spec.layer_disparities.size()); ++l) {
        auto rng = core::make_engine(core::derive_seed(spec.seed, 2, l));
        const int rh = std::uniform_int_distribution<int>(h / 4, (3 * h) / 4)(rng);
        const int rw = std::uniform_int_distribution<int>(wx / 4, (3 * wx) / 4)(rng);
        const int y0 = std::uniform_int_distribution<int>(0, h - rh)(rng);
        const int x0 = std::uniform_int_distribution<int>(0, wx - rw)(rng);
        s.rect.push_back({y0, y0 + rh, x0, x0 + rw});
    }
    return s;
}

data::SceneSpec random_scene(std::mt19937_64& rng) {
    data::SceneSpec spec;
    spec.height = 32;
    spec.width = 48;
    spec.max_disparity = 16;
    spec.seed = rng();
    const int layers = std::uniform_int_distribution<int>(1, 5)(rng);
    spec.layer_disparities.clear();
    for (int l = 0; l < layers; ++l)
        spec.layer_disparities.push_back(std::uniform_int_distribution<int>(0, 15)(rng));
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
        case 0: spec.spectral.tone = data::SpectralTransform::Tone::identity; break;
        case 1:
            spec.spectral.tone = data::SpectralTransform::Tone::gamma;
            spec.spectral.gamma = 1.8;
            break;
        case 2: spec.spectral.tone = data::SpectralTransform::Tone::negate; break;
        default: spec.spectral.tone = data::SpectralTransform::Tone::affine; break;
    }
    return spec;
}

}  // namespace

TEST_CASE("disparity map matches the argmax winner oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const data::SceneSpec spec = random_scene(rng);
        const data::ImagePair pair = data::synthesize_pair(spec);
        const oracles::SceneRects rects = layer_rects(spec);
        const Tensor<int> want = oracles::disparity_map(rects, spec.height, spec.width);
        REQUIRE(pair.disparity_gt.shape() == want.shape());
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                CHECK(pair.disparity_gt.at(y, x, 0) == want.at(y, x, 0));
    }
}

TEST_CASE("occlusion mask matches the two-view visibility oracle") {
    std::mt19937_64 rng(2025);
    for (int trial = 0; trial < 25; ++trial) {
        const data::SceneSpec spec = random_scene(rng);
        const data::ImagePair pair = data::synthesize_pair(spec);
        const oracles::SceneRects rects = layer_rects(spec);
        const Tensor<std::uint8_t> want =
            oracles::occlusion_map(rects, spec.height, spec.width);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                CHECK(pair.occlusion_mask.at(y, x, 0) == want.at(y, x, 0));
    }
}

TEST_CASE("non-occluded guidance pixels equal the transformed clean target bitwise") {
    std::mt19937_64 rng(2026);
    int visible_total = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const data::SceneSpec spec = random_scene(rng);
        const data::ImagePair pair = data::synthesize_pair(spec);
        const Image expected = spec.spectral.apply(pair.clean_target);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                if (!pair.occlusion_mask.at(y, x, 0)) continue;
                const int d = pair.disparity_gt.at(y, x, 0);
                REQUIRE(x - d >= 0);
                ++visible_total;
                for (int c = 0; c < spec.channels; ++c)
                    CHECK(pair.guidance.at(y, x - d, c) == expected.at(y, x, c));
            }
    }
    CHECK(visible_total > 5000);  // the property must be exercised at scale
}

TEST_CASE("disparity values come from the layer set and background fills frame") {
    data::SceneSpec spec;
    spec.height = 24;
    spec.width = 32;
    spec.max_disparity = 16;
    spec.layer_disparities = {3};
    spec.seed = 9;
    const data::ImagePair pair = data::synthesize_pair(spec);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            CHECK(pair.disparity_gt.at(y, x, 0) == 3);
            CHECK(pair.occlusion_mask.at(y, x, 0) == (x >= 3 ? 1 : 0));
        }
    CHECK(pair.clean_target.min() >= 0.0f);
    CHECK(pair.clean_target.max() <= 1.0f);
    CHECK(pair.guidance.min() >= 0.0f);
    CHECK(pair.guidance.max() <= 1.0f);
}

TEST_CASE("synthesize_pair is deterministic and validates its spec") {
    data::SceneSpec spec;
    spec.seed = 31337;
    const data::ImagePair a = data::synthesize_pair(spec);
    const data::ImagePair b = data::synthesize_pair(spec);
    CHECK(max_abs_diff(a.target, b.target) == 0.0);
    CHECK(max_abs_diff(a.guidance, b.guidance) == 0.0);
    spec.seed = 31338;
    const data::ImagePair c = data::synthesize_pair(spec);
    CHECK(max_abs_diff(a.target, c.target) > 0.0);

    data::SceneSpec bad = spec;
    bad.height = 30;  // not a multiple of 4
    CHECK_THROWS_AS(data::synthesize_pair(bad), std::invalid_argument);
    bad = spec;
    bad.layer_disparities = {40};  // outside [0, D)
    CHECK_THROWS_AS(data::synthesize_pair(bad), std::invalid_argument);
    bad = spec;
    bad.layer_disparities.clear();
    CHECK_THROWS_AS(data::synthesize_pair(bad), std::invalid_argument);
    bad = spec;
    bad.channels = 2;
    CHECK_THROWS_AS(data::synthesize_pair(bad), std::invalid_argument);
}

TEST_CASE("spectral transforms invert exactly enough for float storage") {
    std::mt19937_64 rng(2027);
    Image img(Shape{8, 8, 3});
    std::uniform_real_distribution<double> uni(0.01, 0.99);
    for (auto& v : img.vec()) v = static_cast<float>(uni(rng));

    data::SpectralTransform t;
    for (const auto tone :
         {data::SpectralTransform::Tone::identity, data::SpectralTransform::Tone::gamma,
          data::SpectralTransform::Tone::negate, data::SpectralTransform::Tone::affine}) {
        t.tone = tone;
        t.gamma = 1.7;
        for (const bool mix : {false, true}) {
            t.channel_mix = mix;
            const Image round = t.invert(t.apply(img));
            CHECK(max_abs_diff(round, img) < 1e-5);
        }
    }
    t.tone = data::SpectralTransform::Tone::gamma;
    t.gamma = -1.0;
    CHECK_THROWS_AS(t.apply(img), std::invalid_argument);
    t.gamma = 1.0;
    t.tone = data::SpectralTransform::Tone::affine;
    t.affine_lo = 0.9;
    t.affine_hi = 0.2;
    CHECK_THROWS_AS(t.apply(img), std::invalid_argument);
    t = data::SpectralTransform{};
    t.channel_mix = true;
    Image mono(Shape{4, 4, 1});
    CHECK_THROWS_AS(t.apply(mono), std::invalid_argument);
}

TEST_CASE("negate flips guidance ordering against the target") {
    data::SceneSpec spec;
    spec.seed = 5150;
    spec.spectral.tone = data::SpectralTransform::Tone::negate;
    const data::ImagePair pair = data::synthesize_pair(spec);
    // correlation between guidance at matched positions and clean target must
    // be strongly negative
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    int n = 0;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            if (!pair.occlusion_mask.at(y, x, 0)) continue;
            const int d = pair.disparity_gt.at(y, x, 0);
            const double a = pair.clean_target.at(y, x, 0);
            const double b = pair.guidance.at(y, x - d, 0);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
            ++n;
        }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double va = sxx / n - (sx / n) * (sx / n);
    const double vb = syy / n - (sy / n) * (sy / n);
    CHECK(cov / std::sqrt(va * vb) < -0.99);
}

TEST_CASE("patch origins are uniform over the valid grid") {
    data::SceneSpec spec;
    spec.height = 16;
    spec.width = 16;
    spec.max_disparity = 8;
    spec.layer_disparities = {1, 5};
    spec.seed = 4;
    const data::ImagePair pair = data::synthesize_pair(spec);

    // 8x8 patches from 16x16 leave a 9x9 origin grid; bucket into 16
    // quadrant-pairs keeps expected counts high for the chi-square test.
    auto rng = core::make_engine(777);
    const int trials = 6400;
    std::vector<int> counts(16, 0);
    for (int i = 0; i < trials; ++i) {
        const data::ImagePair p = data::sample_patch(pair, 8, 8, rng);
        // recover the origin by matching the first pixel row/col against gt
        int h0 = -1, w0 = -1;
        for (int y = 0; y < 9 && h0 < 0; ++y)
            for (int x = 0; x < 9; ++x) {
                bool match = true;
                for (int k = 0; k < 8 && match; ++k)
                    match = p.target.at(0, k, 0) == pair.target.at(y, x + k, 0) &&
                            p.target.at(k, 0, 0) == pair.target.at(y + k, x, 0);
                if (match) {
                    h0 = y;
                    w0 = x;
                    break;
                }
            }
        REQUIRE(h0 >= 0);
        counts[static_cast<std::size_t>((h0 * 4 / 9) * 4 + (w0 * 4 / 9))]++;
    }
    // buckets hold 4 or 8 origin cells out of 81
    double stat = 0;
    for (int by = 0; by < 4; ++by)
        for (int bx = 0; bx < 4; ++bx) {
            int cells = 0;
            for (int y = 0; y < 9; ++y)
                for (int x = 0; x < 9; ++x)
                    if (y * 4 / 9 == by && x * 4 / 9 == bx) ++cells;
            const double expected = trials * cells / 81.0;
            const double d = counts[static_cast<std::size_t>(by * 4 + bx)] - expected;
            stat += d * d / expected;
        }
    CHECK(stat < 30.578);  // chi-square 99th percentile, 15 dof
}

TEST_CASE("crop preserves all fields and validates bounds") {
    data::SceneSpec spec;
    spec.seed = 88;
    const data::ImagePair pair = data::synthesize_pair(spec);
    const data::ImagePair crop = data::crop_pair(pair, 8, 12, 16, 24);
    CHECK(crop.target.shape() == Shape{16, 24, 1});
    CHECK(crop.disparity_gt.shape() == Shape{16, 24, 1});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 24; ++x) {
            CHECK(crop.target.at(y, x, 0) == pair.target.at(8 + y, 12 + x, 0));
            CHECK(crop.guidance.at(y, x, 0) == pair.guidance.at(8 + y, 12 + x, 0));
            CHECK(crop.disparity_gt.at(y, x, 0) == pair.disparity_gt.at(8 + y, 12 + x, 0));
            CHECK(crop.occlusion_mask.at(y, x, 0) == pair.occlusion_mask.at(8 + y, 12 + x, 0));
        }
    CHECK_THROWS_AS(data::crop_pair(pair, 90, 0, 16, 16), std::invalid_argument);
    auto rng = core::make_engine(1);
    CHECK_THROWS_AS(data::sample_patch(pair, 6, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(data::sample_patch(pair, 256, 256, rng), std::invalid_argument);
}

TEST_CASE("pair folder round trip with 8-bit quantization") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "sgdf_synth_io_test").string();
    fs::remove_all(dir);
    fs::create_directories(dir);

    data::SceneSpec spec;
    spec.seed = 17;
    data::ImagePair pair = data::synthesize_pair(spec);
    // make target differ from clean so the clean file is emitted
    pair.target[0] = pair.target[0] < 0.5f ? 1.0f : 0.0f;
    data::write_pair(dir, "alpha", pair, data::FolderLayout{});
    data::write_pair(dir, "beta", data::synthesize_pair(spec), data::FolderLayout{});

    const auto pairs = data::load_pair_folder(dir, data::FolderLayout{});
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].id == "alpha");
    CHECK(pairs[1].id == "beta");
    // an identical clean target omits the file; the loader then reuses the
    // target as its own reference
    CHECK(fs::exists(dir + "/alpha_clean.pgm"));
    CHECK_FALSE(fs::exists(dir + "/beta_clean.pgm"));
    CHECK(max_abs_diff(pairs[1].pair.clean_target, pairs[1].pair.target) == 0.0);
    CHECK(max_abs_diff(pairs[0].pair.clean_target, pairs[0].pair.target) > 0.1);

    // loaded values are the 8-bit quantization of what was written
    const Image& loaded = pairs[1].pair.target;
    const Image& orig = data::synthesize_pair(spec).target;
    REQUIRE(loaded.shape() == orig.shape());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        const float q = static_cast<float>(std::lround(orig[i] * 255.0) / 255.0);
        CHECK(std::abs(loaded[i] - q) < 1e-6f);
    }

    // unmatched target must throw
    std::FILE* f = std::fopen((dir + "/orphan_target.pgm").c_str(), "wb");
    std::fputs("P5\n1 1\n255\n", f);
    std::fputc(0, f);
    std::fclose(f);
    CHECK_THROWS(data::load_pair_folder(dir, data::FolderLayout{}));
    fs::remove_all(dir);
}
