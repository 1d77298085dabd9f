#include "sgdf/model/sgdformer.hpp"

#include <stdexcept>
#include <string>

namespace sgdf::model {

Sgdformer make_sgdformer(const ModelConfig& cfg, std::uint64_t seed) {
    Sgdformer m;
    m.config = cfg;
    m.ids = build_sgdformer(m.params, cfg, seed);
    return m;
}

std::size_t count_params(const ModelConfig& cfg) {
    ad::ParamStore<float> store;
    build_sgdformer(store, cfg, 0);
    return store.total_params();
}

namespace {

int reflect_index(int i, int n) {
    // reflect without repeating the border sample: n=4 -> 0 1 2 3 2 1 0 1 ...
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

Image pad_reflect_to_multiple4(const Image& img) {
    const Shape s = img.shape();
    const int ph = (4 - s.h % 4) % 4;
    const int pw = (4 - s.w % 4) % 4;
    if (ph == 0 && pw == 0) return img;
    Image out(Shape{s.h + ph, s.w + pw, s.c});
    for (int y = 0; y < s.h + ph; ++y) {
        const int sy = reflect_index(y, s.h);
        for (int x = 0; x < s.w + pw; ++x) {
            const int sx = reflect_index(x, s.w);
            for (int c = 0; c < s.c; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

Image denoise_channel(Sgdformer& model, const Image& noisy, const Image& guidance,
                      ModelTaps<float>* taps) {
    if (noisy.shape().c != 1 || guidance.shape().c != 1)
        throw std::invalid_argument("denoise_channel expects single-channel images");
    if (noisy.shape() != guidance.shape())
        throw std::invalid_argument("denoise_channel: target/guidance shapes differ");
    const Shape orig = noisy.shape();
    const Image pn = pad_reflect_to_multiple4(noisy);
    const Image pg = pad_reflect_to_multiple4(guidance);

    ad::Graph<float> g(&model.params);
    const int in_n = g.constant(pn);
    const int in_g = g.constant(pg);
    const int out = sgdformer_forward(g, model.ids, model.config, in_n, in_g, taps);
    const Tensor<float>& restored = g.val(out);

    Image result(orig);
    for (int y = 0; y < orig.h; ++y)
        for (int x = 0; x < orig.w; ++x) result.at(y, x, 0) = restored.at(y, x, 0);
    return result;
}

std::vector<int> resolve_pairing(const ModelConfig& cfg, int target_channels,
                                 int guidance_channels) {
    std::vector<int> map = cfg.pairing;
    if (map.empty()) {
        map.resize(static_cast<std::size_t>(target_channels));
        for (int t = 0; t < target_channels; ++t) {
            if (guidance_channels == 1) {
                map[static_cast<std::size_t>(t)] = 0;
            } else if (guidance_channels == target_channels) {
                map[static_cast<std::size_t>(t)] = t;
            } else {
                throw std::invalid_argument(
                    "channel pairing required: guidance has " + std::to_string(guidance_channels) +
                    " channels, target has " + std::to_string(target_channels));
            }
        }
        return map;
    }
    if (static_cast<int>(map.size()) != target_channels)
        throw std::invalid_argument("channel pairing lists " + std::to_string(map.size()) +
                                    " entries for " + std::to_string(target_channels) +
                                    " target channels");
    for (const int gch : map)
        if (gch < 0 || gch >= guidance_channels)
            throw std::invalid_argument("channel pairing references guidance channel " +
                                        std::to_string(gch) + " outside [0," +
                                        std::to_string(guidance_channels) + ")");
    return map;
}

Image denoise_image(Sgdformer& model, const Image& noisy, const Image& guidance) {
    const Shape ns = noisy.shape();
    const Shape gs = guidance.shape();
    if (ns.h != gs.h || ns.w != gs.w)
        throw std::invalid_argument("denoise_image: target and guidance sizes differ");
    const std::vector<int> pairing = resolve_pairing(model.config, ns.c, gs.c);

    auto channel = [](const Image& img, int c) {
        Image out(Shape{img.shape().h, img.shape().w, 1});
        for (int y = 0; y < img.shape().h; ++y)
            for (int x = 0; x < img.shape().w; ++x) out.at(y, x, 0) = img.at(y, x, c);
        return out;
    };

    Image out(ns);
    for (int t = 0; t < ns.c; ++t) {
        const Image rec = denoise_channel(model, channel(noisy, t),
                                          channel(guidance, pairing[static_cast<std::size_t>(t)]));
        for (int y = 0; y < ns.h; ++y)
            for (int x = 0; x < ns.w; ++x) out.at(y, x, t) = rec.at(y, x, 0);
    }
    return out;
}

}  // namespace sgdf::model
