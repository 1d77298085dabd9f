#pragma once

#include <string>
#include <vector>

#include "sgdf/ad/graph.hpp"
#include "sgdf/ad/ops.hpp"
#include "sgdf/ad/params.hpp"
#include "sgdf/model/config.hpp"

namespace sgdf::model {

struct ConvIds {
    int w = -1, b = -1;
};

struct LnIds {
    int gamma = -1, beta = -1;
};

// NAFBlock: LN -> 1x1 (c->2c) -> depthwise 3x3 -> SimpleGate -> simplified
// channel attention -> 1x1 (c->c) -> per-channel scale, residual; then the
// gated pointwise FFN stage with its own scale, residual again. The closing
// 1x1 of each branch is zero-initialized and the scales start at 1, so a
// fresh block is the identity.
struct NafBlockIds {
    LnIds ln1;
    ConvIds pw1, dw, sca, pw2;
    int beta = -1;
    LnIds ln2;
    ConvIds pw3, pw4;
    int gamma = -1;
};

// ResBlock: x + conv3x3(relu(conv3x3(x))), second conv zero-initialized.
struct ResBlockIds {
    ConvIds conv1, conv2;
};

struct EncBlockIds {
    BlockKind kind = BlockKind::naf;
    NafBlockIds naf;
    ResBlockIds res;
};

// One feature-extraction stream: shallow 3x3 embed plus the three-scale
// U-shaped body. Target and guidance streams are two separate instances.
struct StreamIds {
    ConvIds intro;
    std::vector<EncBlockIds> enc1, enc2, bottom, dec2, dec1;
    ConvIds down1, down2, up2, up1;
};

template <typename T>
ConvIds make_conv(ad::ParamBuilder<T>& pb, const std::string& name, int kh, int kw, int cin,
                  int cout, bool zero_init = false) {
    return ConvIds{pb.conv_weight(name + ".w", kh, kw, cin, cout, zero_init),
                   pb.bias(name + ".b", cout)};
}

template <typename T>
LnIds make_ln(ad::ParamBuilder<T>& pb, const std::string& name, int c) {
    return LnIds{pb.vector_param(name + ".gamma", c, T(1)), pb.vector_param(name + ".beta", c, T(0))};
}

template <typename T>
NafBlockIds build_naf_block(ad::ParamBuilder<T> pb, int c) {
    NafBlockIds ids;
    ids.ln1 = make_ln(pb, "ln1", c);
    ids.pw1 = make_conv(pb, "pw1", 1, 1, c, 2 * c);
    ids.dw = make_conv(pb, "dw", 3, 3, 1, 2 * c);
    ids.sca = make_conv(pb, "sca", 1, 1, c, c);
    ids.pw2 = make_conv(pb, "pw2", 1, 1, c, c, true);
    ids.beta = pb.vector_param("beta", c, T(1));
    ids.ln2 = make_ln(pb, "ln2", c);
    ids.pw3 = make_conv(pb, "pw3", 1, 1, c, 2 * c);
    ids.pw4 = make_conv(pb, "pw4", 1, 1, c, c, true);
    ids.gamma = pb.vector_param("gamma", c, T(1));
    return ids;
}

template <typename T>
ResBlockIds build_res_block(ad::ParamBuilder<T> pb, int c) {
    return ResBlockIds{make_conv(pb, "conv1", 3, 3, c, c),
                       make_conv(pb, "conv2", 3, 3, c, c, true)};
}

template <typename T>
EncBlockIds build_enc_block(ad::ParamBuilder<T> pb, BlockKind kind, int c) {
    EncBlockIds ids;
    ids.kind = kind;
    if (kind == BlockKind::naf)
        ids.naf = build_naf_block(pb, c);
    else
        ids.res = build_res_block(pb, c);
    return ids;
}

template <typename T>
std::vector<EncBlockIds> build_stage(ad::ParamBuilder<T> pb, BlockKind kind, int count, int c) {
    std::vector<EncBlockIds> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(build_enc_block(pb.scoped(std::to_string(i)), kind, c));
    return out;
}

template <typename T>
StreamIds build_stream(ad::ParamBuilder<T> pb, const ModelConfig& cfg) {
    const int c = cfg.channels;
    const int w0 = c * cfg.encoder.width_mults[0];
    const int w1 = c * cfg.encoder.width_mults[1];
    const int w2 = c * cfg.encoder.width_mults[2];
    const BlockKind kind = cfg.encoder.block;
    StreamIds s;
    s.intro = make_conv(pb, "intro", 3, 3, 1, w0);
    s.enc1 = build_stage(pb.scoped("enc1"), kind, cfg.encoder.blocks[0], w0);
    s.down1 = make_conv(pb, "down1", 2, 2, w0, w1);
    s.enc2 = build_stage(pb.scoped("enc2"), kind, cfg.encoder.blocks[1], w1);
    s.down2 = make_conv(pb, "down2", 2, 2, w1, w2);
    s.bottom = build_stage(pb.scoped("bottom"), kind, cfg.encoder.blocks[2], w2);
    s.up2 = make_conv(pb, "up2", 1, 1, w2, 4 * w1);
    s.dec2 = build_stage(pb.scoped("dec2"), kind, cfg.encoder.blocks[3], w1);
    s.up1 = make_conv(pb, "up1", 1, 1, w1, 4 * w0);
    s.dec1 = build_stage(pb.scoped("dec1"), kind, cfg.encoder.blocks[4], w0);
    return s;
}

template <typename T>
int conv_node(ad::Graph<T>& g, const ConvIds& c, int x, int kh, int kw, int stride, int pad) {
    return ad::ops::conv2d(g, x, g.param(c.w), g.param(c.b), kh, kw, stride, pad);
}

template <typename T>
int naf_block_forward(ad::Graph<T>& g, const NafBlockIds& ids, int x) {
    namespace ops = ad::ops;
    int h = ops::layernorm(g, x, g.param(ids.ln1.gamma), g.param(ids.ln1.beta));
    h = conv_node(g, ids.pw1, h, 1, 1, 1, 0);
    h = ops::dwconv3(g, h, g.param(ids.dw.w), g.param(ids.dw.b));
    h = ops::simple_gate(g, h);
    int s = ops::global_avg_pool(g, h);
    s = conv_node(g, ids.sca, s, 1, 1, 1, 0);
    h = ops::channel_scale(g, h, s);
    h = conv_node(g, ids.pw2, h, 1, 1, 1, 0);
    h = ops::channel_scale(g, h, g.param(ids.beta));
    const int y = ops::add(g, x, h);
    int f = ops::layernorm(g, y, g.param(ids.ln2.gamma), g.param(ids.ln2.beta));
    f = conv_node(g, ids.pw3, f, 1, 1, 1, 0);
    f = ops::simple_gate(g, f);
    f = conv_node(g, ids.pw4, f, 1, 1, 1, 0);
    f = ops::channel_scale(g, f, g.param(ids.gamma));
    return ops::add(g, y, f);
}

template <typename T>
int res_block_forward(ad::Graph<T>& g, const ResBlockIds& ids, int x) {
    int h = conv_node(g, ids.conv1, x, 3, 3, 1, 1);
    h = ad::ops::relu(g, h);
    h = conv_node(g, ids.conv2, h, 3, 3, 1, 1);
    return ad::ops::add(g, x, h);
}

template <typename T>
int stage_forward(ad::Graph<T>& g, const std::vector<EncBlockIds>& stage, int x) {
    for (const EncBlockIds& b : stage)
        x = b.kind == BlockKind::naf ? naf_block_forward(g, b.naf, x)
                                     : res_block_forward(g, b.res, x);
    return x;
}

// Shallow embed: the stream's leading 3x3 conv on a single-channel image.
template <typename T>
int shallow_embed_forward(ad::Graph<T>& g, const StreamIds& s, int image) {
    if (g.val(image).c() != 1)
        throw std::invalid_argument("shallow_embed: expected a single-channel image, got " +
                                    g.val(image).shape().str() +
                                    " (split channels before calling)");
    return conv_node(g, s.intro, image, 3, 3, 1, 1);
}

// U-shaped body over the shallow features; returns full-resolution features.
template <typename T>
int extract_features_forward(ad::Graph<T>& g, const StreamIds& s, int shallow) {
    const Shape in = g.val(shallow).shape();
    if (in.h % 4 != 0 || in.w % 4 != 0)
        throw std::invalid_argument(
            "extract_features: spatial dims " + in.str() +
            " must be divisible by 4; reflect-pad to the next multiple of 4 and crop back");
    namespace ops = ad::ops;
    const int e1 = stage_forward(g, s.enc1, shallow);
    int x = conv_node(g, s.down1, e1, 2, 2, 2, 0);
    const int e2 = stage_forward(g, s.enc2, x);
    x = conv_node(g, s.down2, e2, 2, 2, 2, 0);
    x = stage_forward(g, s.bottom, x);
    x = ops::pixel_shuffle2(g, conv_node(g, s.up2, x, 1, 1, 1, 0));
    x = stage_forward(g, s.dec2, ops::add(g, x, e2));
    x = ops::pixel_shuffle2(g, conv_node(g, s.up1, x, 1, 1, 1, 0));
    x = stage_forward(g, s.dec1, ops::add(g, x, e1));
    return x;
}

template <typename T>
int stream_forward(ad::Graph<T>& g, const StreamIds& s, int image) {
    return extract_features_forward(g, s, shallow_embed_forward(g, s, image));
}

// Kernel-level wrappers used by unit tests and by evaluation code.
template <typename T>
FeatureMap<T> shallow_embed(ad::ParamStore<T>& params, const StreamIds& s,
                            const Tensor<T>& image) {
    ad::Graph<T> g(&params);
    const int out = shallow_embed_forward(g, s, g.constant(image));
    return FeatureMap<T>(g.val(out), Scale::full);
}

template <typename T>
FeatureMap<T> extract_features(ad::ParamStore<T>& params, const StreamIds& s,
                               const FeatureMap<T>& shallow) {
    ad::Graph<T> g(&params);
    const int out = extract_features_forward(g, s, g.constant(shallow.data));
    return FeatureMap<T>(g.val(out), Scale::full);
}

}  // namespace sgdf::model
