#pragma once

#include "sgdf/ad/graph.hpp"
#include "sgdf/ad/ops.hpp"
#include "sgdf/model/backbone.hpp"
#include "sgdf/model/config.hpp"

namespace sgdf::model {

// All strategies map (F_N, F'_G) -> (H, W, C) and end with a 3x3 refinement
// conv. The baseline trunks are two 3x3 convs whose width is chosen for
// parameter parity with svff (see fusion_default_hidden).
struct FusionIds {
    FusionKind kind = FusionKind::svff;
    int hidden = 0;  // baseline trunk width; unused by svff
    ConvIds t1, t2, refine;
};

template <typename T>
FusionIds build_fusion(ad::ParamBuilder<T> pb, const ModelConfig& cfg) {
    const int c = cfg.channels;
    FusionIds ids;
    ids.kind = cfg.fusion.kind;
    ids.refine = make_conv(pb, "refine", 3, 3, c, c);
    if (ids.kind == FusionKind::svff) {
        ids.t1 = make_conv(pb, "t1", 3, 3, 2 * c, 2 * c);
        ids.t2 = make_conv(pb, "t2", 3, 3, 2 * c, 2 * c);
        return ids;
    }
    ids.hidden = cfg.fusion.hidden_override > 0 ? cfg.fusion.hidden_override
                                                : fusion_default_hidden(ids.kind, c);
    const int cin = ids.kind == FusionKind::add ? c : 2 * c;
    ids.t1 = make_conv(pb, "t1", 3, 3, cin, ids.hidden);
    ids.t2 = make_conv(pb, "t2", 3, 3, ids.hidden, c);
    return ids;
}

template <typename T>
struct FusionTaps {
    Tensor<T> w_n, w_g;  // svff weight maps
    Tensor<T> gate;      // attention-baseline gate
};

// Eq-style combination F_F = F_N (*) W_N + F'_G (*) W_G as a standalone
// kernel, so tests can force bypass weights (W_N = 1, W_G = 0, etc.).
template <typename T>
Tensor<T> svff_combine(const Tensor<T>& f_n, const Tensor<T>& f_g_aligned,
                       const Tensor<T>& w_n, const Tensor<T>& w_g) {
    if (f_n.shape() != f_g_aligned.shape() || f_n.shape() != w_n.shape() ||
        f_n.shape() != w_g.shape())
        throw std::invalid_argument("svff_combine: all inputs must share one shape");
    Tensor<T> out(f_n.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f_n[i] * w_n[i] + f_g_aligned[i] * w_g[i];
    return out;
}

template <typename T>
int fusion_forward(ad::Graph<T>& g, const FusionIds& ids, int f_n, int f_g_aligned,
                   FusionTaps<T>* taps = nullptr) {
    namespace ops = ad::ops;
    if (g.val(f_n).shape() != g.val(f_g_aligned).shape())
        throw std::invalid_argument("fusion: input shapes differ: " +
                                    g.val(f_n).shape().str() + " vs " +
                                    g.val(f_g_aligned).shape().str());
    const int c = g.val(f_n).c();
    switch (ids.kind) {
        case FusionKind::svff: {
            int w = ops::channel_concat(g, f_n, f_g_aligned);
            w = ops::tanh_act(g, conv_node(g, ids.t1, w, 3, 3, 1, 1));
            w = ops::tanh_act(g, conv_node(g, ids.t2, w, 3, 3, 1, 1));
            const int w_n = ops::channel_slice(g, w, 0, c);
            const int w_g = ops::channel_slice(g, w, c, c);
            if (taps) {
                taps->w_n = g.val(w_n);
                taps->w_g = g.val(w_g);
            }
            const int fused =
                ops::add(g, ops::hadamard(g, f_n, w_n), ops::hadamard(g, f_g_aligned, w_g));
            return conv_node(g, ids.refine, fused, 3, 3, 1, 1);
        }
        case FusionKind::add: {
            int h = ops::add(g, f_n, f_g_aligned);
            h = ops::gelu(g, conv_node(g, ids.t1, h, 3, 3, 1, 1));
            h = conv_node(g, ids.t2, h, 3, 3, 1, 1);
            return conv_node(g, ids.refine, h, 3, 3, 1, 1);
        }
        case FusionKind::concat: {
            int h = ops::channel_concat(g, f_n, f_g_aligned);
            h = ops::gelu(g, conv_node(g, ids.t1, h, 3, 3, 1, 1));
            h = conv_node(g, ids.t2, h, 3, 3, 1, 1);
            return conv_node(g, ids.refine, h, 3, 3, 1, 1);
        }
        case FusionKind::attention: {
            int h = ops::channel_concat(g, f_n, f_g_aligned);
            h = ops::gelu(g, conv_node(g, ids.t1, h, 3, 3, 1, 1));
            const int gate = ops::sigmoid(g, conv_node(g, ids.t2, h, 3, 3, 1, 1));
            if (taps) taps->gate = g.val(gate);
            const int fused = ops::add(g, f_n, ops::hadamard(g, gate, f_g_aligned));
            return conv_node(g, ids.refine, fused, 3, 3, 1, 1);
        }
    }
    throw std::logic_error("unreachable fusion kind");
}

// Test-facing wrapper over the graph path.
template <typename T>
FeatureMap<T> fuse_features(ad::ParamStore<T>& params, const FusionIds& ids,
                            const FeatureMap<T>& f_n, const FeatureMap<T>& f_g_aligned,
                            FusionTaps<T>* taps = nullptr) {
    ad::Graph<T> g(&params);
    const int out =
        fusion_forward(g, ids, g.constant(f_n.data), g.constant(f_g_aligned.data), taps);
    return FeatureMap<T>(g.val(out), Scale::full);
}

}  // namespace sgdf::model
