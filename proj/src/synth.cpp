#include "sgdf/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "sgdf/core/rng.hpp"

namespace sgdf::data {
namespace {

// Row-stochastic, so mixing keeps values in [0, 1]; determinant 0.468.
const Eigen::Matrix3d& mix_matrix() {
    static const Eigen::Matrix3d m = [] {
        Eigen::Matrix3d v;
        v << 0.7, 0.2, 0.1,
             0.1, 0.7, 0.2,
             0.2, 0.1, 0.7;
        return v;
    }();
    return m;
}

const Eigen::Matrix3d& mix_inverse() {
    static const Eigen::Matrix3d inv = mix_matrix().inverse();
    return inv;
}

double apply_tone(const SpectralTransform& t, double x) {
    switch (t.tone) {
        case SpectralTransform::Tone::identity: return x;
        case SpectralTransform::Tone::gamma: return std::pow(std::max(x, 0.0), t.gamma);
        case SpectralTransform::Tone::negate: return 1.0 - x;
        case SpectralTransform::Tone::affine:
            return t.affine_lo + (t.affine_hi - t.affine_lo) * x;
    }
    throw std::logic_error("unreachable tone");
}

double invert_tone(const SpectralTransform& t, double y) {
    switch (t.tone) {
        case SpectralTransform::Tone::identity: return y;
        case SpectralTransform::Tone::gamma: return std::pow(std::max(y, 0.0), 1.0 / t.gamma);
        case SpectralTransform::Tone::negate: return 1.0 - y;
        case SpectralTransform::Tone::affine:
            return (y - t.affine_lo) / (t.affine_hi - t.affine_lo);
    }
    throw std::logic_error("unreachable tone");
}

void validate_transform(const SpectralTransform& t, int channels) {
    if (t.tone == SpectralTransform::Tone::gamma && !(t.gamma > 0.0))
        throw std::invalid_argument("spectral gamma must be > 0");
    if (t.tone == SpectralTransform::Tone::affine &&
        !(t.affine_hi > t.affine_lo && t.affine_lo >= 0.0 && t.affine_hi <= 1.0))
        throw std::invalid_argument("spectral affine range must satisfy 0 <= lo < hi <= 1");
    if (t.channel_mix && channels != 3)
        throw std::invalid_argument("channel_mix requires 3-channel images");
}

// Multi-octave value noise in [0.02, 0.98], deterministic under seed.
Tensor<float> make_texture(int h, int w, int channels, int octaves, std::uint64_t seed) {
    Tensor<float> tex(Shape{h, w, channels});
    std::vector<double> acc(static_cast<std::size_t>(h) * w);
    for (int ch = 0; ch < channels; ++ch) {
        std::fill(acc.begin(), acc.end(), 0.0);
        double amp = 1.0;
        double amp_sum = 0.0;
        int cell = 1 << (octaves + 1);
        for (int o = 0; o < octaves; ++o) {
            const int gh = h / cell + 2;
            const int gw = w / cell + 2;
            auto rng = core::make_engine(core::derive_seed(seed, ch, o));
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
            for (auto& g : grid) g = uni(rng);
            for (int y = 0; y < h; ++y) {
                const double fy = static_cast<double>(y) / cell;
                const int y0 = static_cast<int>(fy);
                const double ty = fy - y0;
                for (int x = 0; x < w; ++x) {
                    const double fx = static_cast<double>(x) / cell;
                    const int x0 = static_cast<int>(fx);
                    const double tx = fx - x0;
                    const double v00 = grid[static_cast<std::size_t>(y0) * gw + x0];
                    const double v01 = grid[static_cast<std::size_t>(y0) * gw + x0 + 1];
                    const double v10 = grid[static_cast<std::size_t>(y0 + 1) * gw + x0];
                    const double v11 = grid[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
                    const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                                     ty * ((1 - tx) * v10 + tx * v11);
                    acc[static_cast<std::size_t>(y) * w + x] += amp * v;
                }
            }
            amp_sum += amp;
            amp *= 0.55;
            cell = std::max(1, cell / 2);
        }
        double lo = acc[0] / amp_sum, hi = lo;
        for (const double a : acc) {
            lo = std::min(lo, a / amp_sum);
            hi = std::max(hi, a / amp_sum);
        }
        const double span = hi - lo;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double a = acc[static_cast<std::size_t>(y) * w + x] / amp_sum;
                const double v = span < 1e-12 ? 0.5 : 0.02 + 0.96 * (a - lo) / span;
                tex.at(y, x, ch) = static_cast<float>(v);
            }
    }
    return tex;
}

struct Rect {
    int y0, y1, x0, x1;  // half-open
    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
};

}  // namespace

Image SpectralTransform::apply(const Image& in) const {
    validate_transform(*this, in.shape().c);
    Image out(in.shape());
    const int n = in.shape().h * in.shape().w;
    const int c = in.shape().c;
    for (int i = 0; i < n; ++i) {
        double v[3] = {0, 0, 0};
        for (int ch = 0; ch < c; ++ch)
            v[ch] = apply_tone(*this, static_cast<double>(in[static_cast<std::size_t>(i) * c + ch]));
        if (channel_mix) {
            const Eigen::Vector3d m = mix_matrix() * Eigen::Vector3d(v[0], v[1], v[2]);
            for (int ch = 0; ch < c; ++ch) v[ch] = m[ch];
        }
        for (int ch = 0; ch < c; ++ch)
            out[static_cast<std::size_t>(i) * c + ch] = static_cast<float>(v[ch]);
    }
    return out;
}

Image SpectralTransform::invert(const Image& in) const {
    validate_transform(*this, in.shape().c);
    Image out(in.shape());
    const int n = in.shape().h * in.shape().w;
    const int c = in.shape().c;
    for (int i = 0; i < n; ++i) {
        double v[3] = {0, 0, 0};
        for (int ch = 0; ch < c; ++ch)
            v[ch] = static_cast<double>(in[static_cast<std::size_t>(i) * c + ch]);
        if (channel_mix) {
            const Eigen::Vector3d m = mix_inverse() * Eigen::Vector3d(v[0], v[1], v[2]);
            for (int ch = 0; ch < c; ++ch) v[ch] = m[ch];
        }
        for (int ch = 0; ch < c; ++ch)
            out[static_cast<std::size_t>(i) * c + ch] =
                static_cast<float>(invert_tone(*this, v[ch]));
    }
    return out;
}

ImagePair synthesize_pair(const SceneSpec& spec) {
    if (spec.height <= 0 || spec.width <= 0 || spec.height % 4 != 0 || spec.width % 4 != 0)
        throw std::invalid_argument("scene dims must be positive multiples of 4");
    if (spec.channels != 1 && spec.channels != 3)
        throw std::invalid_argument("scene channels must be 1 or 3");
    if (spec.max_disparity < 1)
        throw std::invalid_argument("max_disparity must be >= 1");
    if (spec.layer_disparities.empty())
        throw std::invalid_argument("scene needs at least a background layer");
    for (const int d : spec.layer_disparities)
        if (d < 0 || d >= spec.max_disparity)
            throw std::invalid_argument("layer disparity " + std::to_string(d) +
                                        " outside [0, " + std::to_string(spec.max_disparity) + ")");
    if (spec.texture_octaves < 1)
        throw std::invalid_argument("texture_octaves must be >= 1");
    validate_transform(spec.spectral, spec.channels);

    const int h = spec.height, w = spec.width, c = spec.channels;
    const int wx = w + spec.max_disparity;  // extended canvas feeds the right view
    const int nlayers = static_cast<int>(spec.layer_disparities.size());

    std::vector<Tensor<float>> tex;
    std::vector<Rect> rect;
    tex.reserve(nlayers);
    rect.reserve(nlayers);
    for (int l = 0; l < nlayers; ++l) {
        tex.push_back(make_texture(h, wx, c, spec.texture_octaves,
                                   core::derive_seed(spec.seed, 1, l)));
        if (l == 0) {
            rect.push_back(Rect{0, h, 0, wx});
            continue;
        }
        auto rng = core::make_engine(core::derive_seed(spec.seed, 2, l));
        const int rh = std::uniform_int_distribution<int>(h / 4, (3 * h) / 4)(rng);
        const int rw = std::uniform_int_distribution<int>(wx / 4, (3 * wx) / 4)(rng);
        const int y0 = std::uniform_int_distribution<int>(0, h - rh)(rng);
        const int x0 = std::uniform_int_distribution<int>(0, wx - rw)(rng);
        rect.push_back(Rect{y0, y0 + rh, x0, x0 + rw});
    }

    // Nearest covering layer wins; ties on disparity go to the later layer.
    const auto winner_at = [&](int y, int x_canvas) {
        int best = 0;
        for (int l = 1; l < nlayers; ++l)
            if (rect[l].contains(y, x_canvas) &&
                spec.layer_disparities[l] >= spec.layer_disparities[best])
                best = l;
        return best;
    };

    ImagePair pair;
    pair.clean_target = Image(Shape{h, w, c});
    pair.disparity_gt = Tensor<int>(Shape{h, w, 1});
    pair.occlusion_mask = Tensor<std::uint8_t>(Shape{h, w, 1});
    Image right_clean(Shape{h, w, c});
    Tensor<int> right_winner(Shape{h, w, 1});

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int lw = winner_at(y, x);  // left view: canvas column == view column
            pair.disparity_gt.at(y, x, 0) = spec.layer_disparities[lw];
            for (int ch = 0; ch < c; ++ch)
                pair.clean_target.at(y, x, ch) = tex[lw].at(y, x, ch);
        }

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Right pixel x sees layer l at canvas column x + d_l.
            int best = 0;
            for (int l = 1; l < nlayers; ++l)
                if (rect[l].contains(y, x + spec.layer_disparities[l]) &&
                    spec.layer_disparities[l] >= spec.layer_disparities[best])
                    best = l;
            right_winner.at(y, x, 0) = best;
            for (int ch = 0; ch < c; ++ch)
                right_clean.at(y, x, ch) = tex[best].at(y, x + spec.layer_disparities[best], ch);
        }

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int l = winner_at(y, x);
            const int d = spec.layer_disparities[l];
            const bool vis = x - d >= 0 && right_winner.at(y, x - d, 0) == l;
            pair.occlusion_mask.at(y, x, 0) = vis ? 1 : 0;
        }

    pair.guidance = spec.spectral.apply(right_clean);
    pair.target = pair.clean_target;  // noise is applied downstream per batch
    return pair;
}

ImagePair crop_pair(const ImagePair& pair, int h0, int w0, int patch_h, int patch_w) {
    const Shape s = pair.target.shape();
    if (h0 < 0 || w0 < 0 || h0 + patch_h > s.h || w0 + patch_w > s.w)
        throw std::invalid_argument("crop window outside image bounds");
    const auto crop = [&](const auto& src) {
        using Src = std::decay_t<decltype(src)>;
        if (src.empty()) return Src();
        Src out(Shape{patch_h, patch_w, src.shape().c});
        for (int y = 0; y < patch_h; ++y)
            for (int x = 0; x < patch_w; ++x)
                for (int ch = 0; ch < src.shape().c; ++ch)
                    out.at(y, x, ch) = src.at(h0 + y, w0 + x, ch);
        return out;
    };
    ImagePair out;
    out.target = crop(pair.target);
    out.guidance = crop(pair.guidance);
    out.clean_target = crop(pair.clean_target);
    out.disparity_gt = crop(pair.disparity_gt);
    out.occlusion_mask = crop(pair.occlusion_mask);
    return out;
}

ImagePair sample_patch(const ImagePair& pair, int patch_h, int patch_w, std::mt19937_64& rng) {
    const Shape s = pair.target.shape();
    if (patch_h <= 0 || patch_w <= 0 || patch_h % 4 != 0 || patch_w % 4 != 0)
        throw std::invalid_argument("patch dims must be positive multiples of 4");
    if (patch_h > s.h || patch_w > s.w)
        throw std::invalid_argument("patch larger than source image");
    const int h0 = std::uniform_int_distribution<int>(0, s.h - patch_h)(rng);
    const int w0 = std::uniform_int_distribution<int>(0, s.w - patch_w)(rng);
    return crop_pair(pair, h0, w0, patch_h, patch_w);
}

}  // namespace sgdf::data
