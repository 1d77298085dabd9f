#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sgdf/core/tensor.hpp"

namespace sgdf::data {

// Rectified stereo training sample. target is the left view, guidance the
// right view; positive disparity d maps left (h, w) to right (h, w - d).
struct ImagePair {
    Image target;
    Image guidance;
    Image clean_target;              // empty when no ground truth exists
    Tensor<int> disparity_gt;        // H x W x 1, empty when unknown
    Tensor<std::uint8_t> occlusion_mask;  // H x W x 1, 1 = visible in both views

    bool has_clean() const { return !clean_target.empty(); }
    bool has_disparity() const { return !disparity_gt.empty(); }
};

// Monotone tone curve plus an optional invertible channel mix. Alters
// intensities while preserving structure, standing in for the radiometric gap
// between spectral bands.
struct SpectralTransform {
    enum class Tone { identity, gamma, negate, affine };
    Tone tone = Tone::identity;
    double gamma = 1.0;       // tone == gamma
    double affine_lo = 0.1;   // tone == affine: y = lo + (hi - lo) * x
    double affine_hi = 0.9;
    bool channel_mix = false;  // 3-channel only: fixed invertible mixing matrix

    Image apply(const Image& in) const;
    Image invert(const Image& in) const;
};

// Fronto-parallel layered scene with constant integer disparity per layer.
// layer_disparities[0] is the full-frame background; subsequent entries are
// foreground rectangles at (usually nearer) disparities. Integer disparities
// give exact correspondences, so attention argmax tests have a unique answer.
struct SceneSpec {
    int height = 96;
    int width = 160;
    int channels = 1;
    int max_disparity = 32;               // D; all layer disparities in [0, D)
    std::vector<int> layer_disparities = {2, 12};
    SpectralTransform spectral;
    int texture_octaves = 4;
    std::uint64_t seed = 0;
};

// Renders the layered scene into a clean stereo pair with ground-truth
// disparity and occlusion. Deterministic given spec.seed.
ImagePair synthesize_pair(const SceneSpec& spec);

// Crops the same (h, w) window from every field of the pair. Disparity values
// are unchanged; guidance content referenced by large disparities may fall
// outside the crop, as with real rectified training patches.
ImagePair sample_patch(const ImagePair& pair, int patch_h, int patch_w,
                       std::mt19937_64& rng);

ImagePair crop_pair(const ImagePair& pair, int h0, int w0, int patch_h, int patch_w);

}  // namespace sgdf::data
