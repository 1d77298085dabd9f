#pragma once

#include <string>

#include "sgdf/ad/graph.hpp"
#include "sgdf/ad/ops.hpp"
#include "sgdf/model/backbone.hpp"
#include "sgdf/model/config.hpp"

namespace sgdf::model {

// One propagation stage: neighborhood self-attention (or its 3x3-conv
// ablation stand-in) wrapped in a residual whose output projection starts at
// zero, so propagation begins as the identity.
struct PsiStageIds {
    PropagationKind kind = PropagationKind::nsa;
    ConvIds q, k, v, proj;  // nsa
    int pos_bias = -1;      // optional learned per-slot logit bias
    ConvIds conv;           // conv variant
};

struct NrcaIds {
    ConvIds agg_q1, agg_q2;  // query aggregator, 2x2 stride 2, C->2C->2C
    ConvIds agg_k1, agg_k2;  // key aggregator, unshared with the query one
    ConvIds value;           // 1x1 C->C
    PsiStageIds stage1, stage2;
    ConvIds up1, up2;        // 1x1 disparity expanders D/4->D/2->D
};

// Pixel-level cross-attention baseline: 1x1 query/key projections, directly
// softmaxed over all D disparities at full resolution.
struct VanillaAttnIds {
    ConvIds q, k, value;
};

struct AttnIds {
    AttentionKind kind = AttentionKind::nrca;
    NrcaIds nrca;
    VanillaAttnIds vanilla;
};

template <typename T>
PsiStageIds build_psi_stage(ad::ParamBuilder<T> pb, const ModelConfig& cfg, int bins) {
    PsiStageIds s;
    s.kind = cfg.propagation;
    if (cfg.propagation == PropagationKind::nsa) {
        s.q = make_conv(pb, "q", 1, 1, bins, bins);
        s.k = make_conv(pb, "k", 1, 1, bins, bins);
        s.v = make_conv(pb, "v", 1, 1, bins, bins);
        s.proj = make_conv(pb, "proj", 1, 1, bins, bins, true);
        if (cfg.nsa_positional_bias)
            s.pos_bias = pb.vector_param("pos_bias", cfg.nsa_window * cfg.nsa_window, T(0));
    } else {
        s.conv = make_conv(pb, "conv", 3, 3, bins, bins, true);
    }
    return s;
}

template <typename T>
NrcaIds build_nrca(ad::ParamBuilder<T> pb, const ModelConfig& cfg) {
    const int c = cfg.channels;
    const int d = cfg.max_disparity;
    NrcaIds ids;
    ids.agg_q1 = make_conv(pb, "agg_q1", 2, 2, c, 2 * c);
    ids.agg_q2 = make_conv(pb, "agg_q2", 2, 2, 2 * c, 2 * c);
    ids.agg_k1 = make_conv(pb, "agg_k1", 2, 2, c, 2 * c);
    ids.agg_k2 = make_conv(pb, "agg_k2", 2, 2, 2 * c, 2 * c);
    ids.value = make_conv(pb, "value", 1, 1, c, c);
    ids.stage1 = build_psi_stage(pb.scoped("psi1"), cfg, d / 4);
    ids.up1 = make_conv(pb, "up1", 1, 1, d / 4, d / 2);
    ids.stage2 = build_psi_stage(pb.scoped("psi2"), cfg, d / 2);
    ids.up2 = make_conv(pb, "up2", 1, 1, d / 2, d);
    return ids;
}

template <typename T>
VanillaAttnIds build_vanilla_attn(ad::ParamBuilder<T> pb, const ModelConfig& cfg) {
    const int c = cfg.channels;
    return VanillaAttnIds{make_conv(pb, "q", 1, 1, c, c), make_conv(pb, "k", 1, 1, c, c),
                          make_conv(pb, "value", 1, 1, c, c)};
}

template <typename T>
AttnIds build_attn(ad::ParamBuilder<T> pb, const ModelConfig& cfg) {
    AttnIds ids;
    ids.kind = cfg.attention;
    if (cfg.attention == AttentionKind::nrca)
        ids.nrca = build_nrca(pb.scoped("nrca"), cfg);
    else
        ids.vanilla = build_vanilla_attn(pb.scoped("vanilla"), cfg);
    return ids;
}

// ----------------------------------------------------------- graph fowards ---

template <typename T>
int aggregate_forward(ad::Graph<T>& g, const ConvIds& c1, const ConvIds& c2, int x) {
    const Shape s = g.val(x).shape();
    if (s.h % 4 != 0 || s.w % 4 != 0)
        throw std::invalid_argument("aggregate_features: dims " + s.str() +
                                    " must be divisible by 4");
    return conv_node(g, c2, conv_node(g, c1, x, 2, 2, 2, 0), 2, 2, 2, 0);
}

template <typename T>
int psi_stage_forward(ad::Graph<T>& g, const PsiStageIds& s, const ModelConfig& cfg, int x) {
    namespace ops = ad::ops;
    if (s.kind == PropagationKind::conv) return ops::add(g, x, conv_node(g, s.conv, x, 3, 3, 1, 1));
    const int q = conv_node(g, s.q, x, 1, 1, 1, 0);
    const int k = conv_node(g, s.k, x, 1, 1, 1, 0);
    const int v = conv_node(g, s.v, x, 1, 1, 1, 0);
    const int a = s.pos_bias >= 0
                      ? ops::nsa_attend_biased(g, q, k, v, cfg.nsa_window, g.param(s.pos_bias))
                      : ops::nsa_attend(g, q, k, v, cfg.nsa_window);
    return ops::add(g, x, conv_node(g, s.proj, a, 1, 1, 1, 0));
}

// Coarse map -> fine normalized map. Boundary sentinels are zeroed before the
// propagation network ever sees them, then the boundary is re-imposed as a
// pre-softmax -inf mask at full resolution.
template <typename T>
int propagate_forward(ad::Graph<T>& g, const NrcaIds& ids, const ModelConfig& cfg, int coarse) {
    namespace ops = ad::ops;
    int x = ops::sanitize(g, coarse);
    x = psi_stage_forward(g, ids.stage1, cfg, x);
    x = ops::bilinear_up2(g, x);
    x = conv_node(g, ids.up1, x, 1, 1, 1, 0);
    x = psi_stage_forward(g, ids.stage2, cfg, x);
    x = ops::bilinear_up2(g, x);
    x = conv_node(g, ids.up2, x, 1, 1, 1, 0);
    x = ops::mask_invalid(g, x);
    return ops::masked_softmax(g, x);
}

template <typename T>
struct AttnTaps {
    Tensor<T> coarse;  // unnormalized coarse scores (empty for vanilla)
    Tensor<T> fine;    // normalized full-resolution volume
};

// F_N drives the query, F_G the key/value; returns aligned guidance features.
template <typename T>
int nrca_forward(ad::Graph<T>& g, const NrcaIds& ids, const ModelConfig& cfg, int f_n, int f_g,
                 AttnTaps<T>* taps = nullptr) {
    namespace ops = ad::ops;
    const int fq = aggregate_forward(g, ids.agg_q1, ids.agg_q2, f_n);
    const int fk = aggregate_forward(g, ids.agg_k1, ids.agg_k2, f_g);
    const int coarse = ops::attention_scores(g, fq, fk, cfg.max_disparity / 4);
    const int fine = propagate_forward(g, ids, cfg, coarse);
    if (taps) {
        taps->coarse = g.val(coarse);
        taps->fine = g.val(fine);
    }
    const int fv = conv_node(g, ids.value, f_g, 1, 1, 1, 0);
    return ops::gather_guidance(g, fine, fv);
}

template <typename T>
int vanilla_attn_forward(ad::Graph<T>& g, const VanillaAttnIds& ids, const ModelConfig& cfg,
                         int f_n, int f_g, AttnTaps<T>* taps = nullptr) {
    namespace ops = ad::ops;
    const int q = conv_node(g, ids.q, f_n, 1, 1, 1, 0);
    const int k = conv_node(g, ids.k, f_g, 1, 1, 1, 0);
    const int fine = ops::masked_softmax(g, ops::attention_scores(g, q, k, cfg.max_disparity));
    if (taps) taps->fine = g.val(fine);
    const int fv = conv_node(g, ids.value, f_g, 1, 1, 1, 0);
    return ops::gather_guidance(g, fine, fv);
}

template <typename T>
int attn_forward(ad::Graph<T>& g, const AttnIds& ids, const ModelConfig& cfg, int f_n, int f_g,
                 AttnTaps<T>* taps = nullptr) {
    return ids.kind == AttentionKind::nrca
               ? nrca_forward(g, ids.nrca, cfg, f_n, f_g, taps)
               : vanilla_attn_forward(g, ids.vanilla, cfg, f_n, f_g, taps);
}

// -------------------------------------------------- test-facing module API ---

template <typename T>
FeatureMap<T> aggregate_features(ad::ParamStore<T>& params, const ConvIds& c1,
                                 const ConvIds& c2, const FeatureMap<T>& f) {
    ad::Graph<T> g(&params);
    const int out = aggregate_forward(g, c1, c2, g.constant(f.data));
    return FeatureMap<T>(g.val(out), Scale::quarter);
}

// Unnormalized coarse scores over D/4 bins with -inf at w-d < 0.
template <typename T>
AttentionVolume<T> coarse_attention(const FeatureMap<T>& fq, const FeatureMap<T>& fk,
                                    int max_disparity) {
    if (fq.data.shape() != fk.data.shape())
        throw std::invalid_argument("coarse_attention: query/key shapes differ: " +
                                    fq.data.shape().str() + " vs " + fk.data.shape().str());
    if (max_disparity % 4 != 0)
        throw std::invalid_argument("coarse_attention: max disparity must be divisible by 4");
    return AttentionVolume<T>(
        ad::kernels::attention_scores_forward(fq.data, fk.data, max_disparity / 4),
        AttnRes::coarse, false);
}

// Pure windowed self-attention over projected q/k/v (no residual wrapper).
// attn_rows, when given, receives the (h, w, k*k) normalized window weights.
template <typename T>
Tensor<T> neighborhood_self_attention(ad::ParamStore<T>& params, const PsiStageIds& s,
                                      const Tensor<T>& x, int kwin,
                                      Tensor<T>* attn_rows = nullptr) {
    namespace kn = ad::kernels;
    const Tensor<T> q = kn::conv2d_forward(x, params.value(s.q.w), params.value(s.q.b), 1, 1, 1, 0);
    const Tensor<T> k = kn::conv2d_forward(x, params.value(s.k.w), params.value(s.k.b), 1, 1, 1, 0);
    const Tensor<T> v = kn::conv2d_forward(x, params.value(s.v.w), params.value(s.v.b), 1, 1, 1, 0);
    kn::NsaResult<T> res = kn::nsa_attend_forward(q, k, v, kwin);
    if (attn_rows) *attn_rows = std::move(res.attn);
    return std::move(res.out);
}

template <typename T>
AttentionVolume<T> propagate_attention(ad::ParamStore<T>& params, const NrcaIds& ids,
                                       const ModelConfig& cfg, const AttentionVolume<T>& coarse) {
    if (coarse.res != AttnRes::coarse)
        throw std::invalid_argument("propagate_attention: expected a coarse volume");
    ad::Graph<T> g(&params);
    const int out = propagate_forward(g, ids, cfg, g.constant(coarse.scores));
    return AttentionVolume<T>(g.val(out), AttnRes::fine, true);
}

template <typename T>
FeatureMap<T> generate_aligned_guidance(const AttentionVolume<T>& fine,
                                        const FeatureMap<T>& fv) {
    if (!fine.normalized)
        throw std::invalid_argument("generate_aligned_guidance: attention must be normalized");
    if (fine.res != AttnRes::fine)
        throw std::invalid_argument("generate_aligned_guidance: expected a fine volume");
    return FeatureMap<T>(ad::kernels::gather_guidance_forward(fine.scores, fv.data),
                         Scale::full);
}

}  // namespace sgdf::model
