#pragma once

#include <cstdint>
#include <vector>

#include "sgdf/ad/graph.hpp"
#include "sgdf/ad/ops.hpp"
#include "sgdf/ad/params.hpp"
#include "sgdf/core/rng.hpp"
#include "sgdf/model/backbone.hpp"
#include "sgdf/model/config.hpp"
#include "sgdf/model/fusion.hpp"
#include "sgdf/model/nrca.hpp"

namespace sgdf::model {

struct FfnIds {
    ConvIds c1, c2;
    LnIds ln;
};

struct TransformerBlockIds {
    AttnIds attn;
    FusionIds fuse;
    FfnIds ffn;
};

struct SgdformerIds {
    StreamIds target_stream;    // noisy-image feature extractor
    StreamIds guidance_stream;  // unshared guidance feature extractor
    std::vector<TransformerBlockIds> blocks;
    ConvIds head;  // 3x3 C->1, zero-initialized: identity at init via the
                   // global residual from the noisy input
};

template <typename T>
FfnIds build_ffn(ad::ParamBuilder<T> pb, const ModelConfig& cfg) {
    const int c = cfg.channels;
    FfnIds ids;
    ids.c1 = make_conv(pb, "c1", 1, 1, c, cfg.ffn_expansion * c);
    ids.c2 = make_conv(pb, "c2", 1, 1, cfg.ffn_expansion * c, c);
    ids.ln = make_ln(pb, "ln", c);
    return ids;
}

template <typename T>
SgdformerIds build_sgdformer(ad::ParamStore<T>& store, const ModelConfig& cfg,
                             std::uint64_t seed) {
    cfg.validate();
    auto rng = core::make_engine(seed);
    ad::ParamBuilder<T> pb(store, rng);
    SgdformerIds ids;
    ids.target_stream = build_stream(pb.scoped("target_stream"), cfg);
    ids.guidance_stream = build_stream(pb.scoped("guidance_stream"), cfg);
    ids.blocks.reserve(static_cast<std::size_t>(cfg.num_blocks));
    for (int l = 0; l < cfg.num_blocks; ++l) {
        ad::ParamBuilder<T> bp = pb.scoped("blocks." + std::to_string(l));
        TransformerBlockIds b;
        b.attn = build_attn(bp.scoped("attn"), cfg);
        b.fuse = build_fusion(bp.scoped("fuse"), cfg);
        b.ffn = build_ffn(bp.scoped("ffn"), cfg);
        ids.blocks.push_back(b);
    }
    ids.head = make_conv(pb, "head", 3, 3, cfg.channels, 1, true);
    return ids;
}

template <typename T>
struct BlockTaps {
    AttnTaps<T> attn;
    FusionTaps<T> fuse;
    Tensor<T> aligned;  // F'_G
};

template <typename T>
struct ModelTaps {
    Tensor<T> f_n0, f_g;  // extractor outputs
    std::vector<BlockTaps<T>> blocks;
};

// One block: F'_G = attention(F_N, F_G); F_R = fuse(F_N, F'_G);
// out = F_R + LN(FFN(F_R)) with the norm after the FFN as the default
// (config can flip to the conventional pre-norm form).
template <typename T>
int transformer_block_forward(ad::Graph<T>& g, const TransformerBlockIds& ids,
                              const ModelConfig& cfg, int f_n, int f_g,
                              BlockTaps<T>* taps = nullptr) {
    namespace ops = ad::ops;
    if (g.val(f_n).shape() != g.val(f_g).shape())
        throw std::invalid_argument("transformer_block: feature shapes differ");
    const int aligned = attn_forward(g, ids.attn, cfg, f_n, f_g, taps ? &taps->attn : nullptr);
    if (taps) taps->aligned = g.val(aligned);
    const int f_r = fusion_forward(g, ids.fuse, f_n, aligned, taps ? &taps->fuse : nullptr);
    int h = f_r;
    if (cfg.ffn_norm == FfnNorm::pre)
        h = ops::layernorm(g, h, g.param(ids.ffn.ln.gamma), g.param(ids.ffn.ln.beta));
    h = conv_node(g, ids.ffn.c1, h, 1, 1, 1, 0);
    h = ops::gelu(g, h);
    h = conv_node(g, ids.ffn.c2, h, 1, 1, 1, 0);
    if (cfg.ffn_norm == FfnNorm::post)
        h = ops::layernorm(g, h, g.param(ids.ffn.ln.gamma), g.param(ids.ffn.ln.beta));
    return ops::add(g, f_r, h);
}

// Full single-channel pipeline on dims already divisible by 4. The guidance
// features F_G are computed once and reused unchanged by every block.
template <typename T>
int sgdformer_forward(ad::Graph<T>& g, const SgdformerIds& ids, const ModelConfig& cfg,
                      int noisy, int guidance, ModelTaps<T>* taps = nullptr) {
    namespace ops = ad::ops;
    int f_n = stream_forward(g, ids.target_stream, noisy);
    const int f_g = stream_forward(g, ids.guidance_stream, guidance);
    if (taps) {
        taps->f_n0 = g.val(f_n);
        taps->f_g = g.val(f_g);
        taps->blocks.resize(ids.blocks.size());
    }
    for (std::size_t l = 0; l < ids.blocks.size(); ++l)
        f_n = transformer_block_forward(g, ids.blocks[l], cfg, f_n, f_g,
                                        taps ? &taps->blocks[l] : nullptr);
    const int head = conv_node(g, ids.head, f_n, 3, 3, 1, 1);
    return cfg.residual_head ? ops::add(g, head, noisy) : head;
}

// Ready-to-use model: config + parameters + ids.
struct Sgdformer {
    ModelConfig config;
    ad::ParamStore<float> params;
    SgdformerIds ids;
};

Sgdformer make_sgdformer(const ModelConfig& cfg, std::uint64_t seed);

std::size_t count_params(const ModelConfig& cfg);

// Reflect-pads to the next multiple of 4, runs the network, crops back.
// Inputs must be single-channel.
Image denoise_channel(Sgdformer& model, const Image& noisy, const Image& guidance,
                      ModelTaps<float>* taps = nullptr);

// Per-channel driver: target channel t is denoised with guidance channel
// pairing[t]. An empty map broadcasts single-channel guidance or pairs same
// indices.
Image denoise_image(Sgdformer& model, const Image& noisy, const Image& guidance);

// Effective pairing map after defaulting rules; throws on bad references.
std::vector<int> resolve_pairing(const ModelConfig& cfg, int target_channels,
                                 int guidance_channels);

Image pad_reflect_to_multiple4(const Image& img);

}  // namespace sgdf::model
