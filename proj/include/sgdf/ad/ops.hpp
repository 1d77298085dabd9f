#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "sgdf/ad/graph.hpp"
#include "sgdf/ad/kernels.hpp"

// Tape-building wrappers around the kernels. Each returns the new node id.
namespace sgdf::ad::ops {

template <typename T>
int conv2d(Graph<T>& g, int x, int w, int b, int kh, int kw, int stride, int pad) {
    Tensor<T> out =
        kernels::conv2d_forward(g.val(x), g.val(w), g.val(b), kh, kw, stride, pad);
    return g.make(std::move(out), {x, w, b}, [=](Graph<T>& gg, int self) {
        kernels::conv2d_backward(gg.val(x), gg.val(w), gg.grad(self), kh, kw, stride, pad,
                                 gg.grad_sink(x), gg.grad_sink(w), gg.grad_sink(b));
    });
}

template <typename T>
int conv1x1(Graph<T>& g, int x, int w, int b) {
    return conv2d(g, x, w, b, 1, 1, 1, 0);
}

template <typename T>
int conv3x3(Graph<T>& g, int x, int w, int b) {
    return conv2d(g, x, w, b, 3, 3, 1, 1);
}

template <typename T>
int dwconv3(Graph<T>& g, int x, int w, int b) {
    Tensor<T> out = kernels::dwconv3_forward(g.val(x), g.val(w), g.val(b));
    return g.make(std::move(out), {x, w, b}, [=](Graph<T>& gg, int self) {
        kernels::dwconv3_backward(gg.val(x), gg.val(w), gg.grad(self), gg.grad_sink(x),
                                  gg.grad_sink(w), gg.grad_sink(b));
    });
}

template <typename T>
int layernorm(Graph<T>& g, int x, int gamma, int beta) {
    Tensor<T> out = kernels::layernorm_forward(g.val(x), g.val(gamma), g.val(beta));
    return g.make(std::move(out), {x, gamma, beta}, [=](Graph<T>& gg, int self) {
        kernels::layernorm_backward(gg.val(x), gg.val(gamma), gg.grad(self), gg.grad_sink(x),
                                    gg.grad_sink(gamma), gg.grad_sink(beta));
    });
}

template <typename T>
int gelu(Graph<T>& g, int x) {
    Tensor<T> out = kernels::gelu_forward(g.val(x));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::gelu_backward(gg.val(x), gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int tanh_act(Graph<T>& g, int x) {
    Tensor<T> out(g.val(x).shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(g.val(x)[i]);
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::tanh_backward(gg.val(self), gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int sigmoid(Graph<T>& g, int x) {
    Tensor<T> out(g.val(x).shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(g.val(x)[i]))));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::sigmoid_backward(gg.val(self), gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int relu(Graph<T>& g, int x) {
    Tensor<T> out(g.val(x).shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(g.val(x)[i], T(0));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        if (Tensor<T>* dx = gg.grad_sink(x)) {
            const Tensor<T>& gr = gg.grad(self);
            for (std::size_t i = 0; i < gr.size(); ++i)
                if (gg.val(x)[i] > T(0)) (*dx)[i] += gr[i];
        }
    });
}

template <typename T>
int simple_gate(Graph<T>& g, int x) {
    Tensor<T> out = kernels::simple_gate_forward(g.val(x));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::simple_gate_backward(gg.val(x), gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int global_avg_pool(Graph<T>& g, int x) {
    Tensor<T> out = kernels::global_avg_pool_forward(g.val(x));
    const Shape xshape = g.val(x).shape();
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::global_avg_pool_backward(xshape, gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int channel_scale(Graph<T>& g, int x, int s) {
    Tensor<T> out = kernels::channel_scale_forward(g.val(x), g.val(s));
    return g.make(std::move(out), {x, s}, [=](Graph<T>& gg, int self) {
        kernels::channel_scale_backward(gg.val(x), gg.val(s), gg.grad(self), gg.grad_sink(x),
                                        gg.grad_sink(s));
    });
}

template <typename T>
int add(Graph<T>& g, int a, int b) {
    const Tensor<T>& ta = g.val(a);
    const Tensor<T>& tb = g.val(b);
    if (ta.shape() != tb.shape())
        throw std::invalid_argument("add: shape mismatch " + ta.shape().str() + " vs " +
                                    tb.shape().str());
    Tensor<T> out(ta.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] + tb[i];
    return g.make(std::move(out), {a, b}, [=](Graph<T>& gg, int self) {
        const Tensor<T>& gr = gg.grad(self);
        if (Tensor<T>* da = gg.grad_sink(a))
            for (std::size_t i = 0; i < gr.size(); ++i) (*da)[i] += gr[i];
        if (Tensor<T>* db = gg.grad_sink(b))
            for (std::size_t i = 0; i < gr.size(); ++i) (*db)[i] += gr[i];
    });
}

template <typename T>
int hadamard(Graph<T>& g, int a, int b) {
    const Tensor<T>& ta = g.val(a);
    const Tensor<T>& tb = g.val(b);
    if (ta.shape() != tb.shape())
        throw std::invalid_argument("hadamard: shape mismatch");
    Tensor<T> out(ta.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ta[i] * tb[i];
    return g.make(std::move(out), {a, b}, [=](Graph<T>& gg, int self) {
        const Tensor<T>& gr = gg.grad(self);
        if (Tensor<T>* da = gg.grad_sink(a))
            for (std::size_t i = 0; i < gr.size(); ++i) (*da)[i] += gr[i] * gg.val(b)[i];
        if (Tensor<T>* db = gg.grad_sink(b))
            for (std::size_t i = 0; i < gr.size(); ++i) (*db)[i] += gr[i] * gg.val(a)[i];
    });
}

template <typename T>
int channel_concat(Graph<T>& g, int a, int b) {
    Tensor<T> out = kernels::channel_concat_forward(g.val(a), g.val(b));
    const int ca = g.val(a).c();
    const int cb = g.val(b).c();
    return g.make(std::move(out), {a, b}, [=](Graph<T>& gg, int self) {
        kernels::channel_concat_backward(ca, cb, gg.grad(self), gg.grad_sink(a),
                                         gg.grad_sink(b));
    });
}

template <typename T>
int channel_slice(Graph<T>& g, int x, int c0, int len) {
    Tensor<T> out = kernels::channel_slice_forward(g.val(x), c0, len);
    const int cin = g.val(x).c();
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::channel_slice_backward(cin, c0, gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int pixel_shuffle2(Graph<T>& g, int x) {
    Tensor<T> out = kernels::pixel_shuffle2_forward(g.val(x));
    const Shape xshape = g.val(x).shape();
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::pixel_shuffle2_backward(xshape, gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int bilinear_up2(Graph<T>& g, int x) {
    Tensor<T> out = kernels::bilinear_up2_forward(g.val(x));
    const Shape xshape = g.val(x).shape();
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::bilinear_up2_backward(xshape, gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int attention_scores(Graph<T>& g, int fq, int fk, int nbins) {
    Tensor<T> out = kernels::attention_scores_forward(g.val(fq), g.val(fk), nbins);
    return g.make(std::move(out), {fq, fk}, [=](Graph<T>& gg, int self) {
        kernels::attention_scores_backward(gg.val(fq), gg.val(fk), gg.grad(self),
                                           gg.grad_sink(fq), gg.grad_sink(fk));
    });
}

template <typename T>
int masked_softmax(Graph<T>& g, int x) {
    Tensor<T> out = kernels::masked_softmax_forward(g.val(x));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::masked_softmax_backward(gg.val(self), gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int sanitize(Graph<T>& g, int x) {
    Tensor<T> out = kernels::sanitize_forward(g.val(x));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::sanitize_backward(gg.val(x), gg.grad(self), gg.grad_sink(x));
    });
}

template <typename T>
int mask_invalid(Graph<T>& g, int x) {
    Tensor<T> out = kernels::mask_invalid_forward(g.val(x));
    return g.make(std::move(out), {x}, [=](Graph<T>& gg, int self) {
        kernels::mask_invalid_backward(gg.grad(self), gg.grad_sink(x));
    });
}

// Windowed attention over already-projected q/k/v; attn_copy (optional)
// receives the normalized window weights for inspection.
template <typename T>
int nsa_attend(Graph<T>& g, int q, int k, int v, int kwin, Tensor<T>* attn_copy = nullptr) {
    kernels::NsaResult<T> res = kernels::nsa_attend_forward(g.val(q), g.val(k), g.val(v), kwin);
    if (attn_copy) *attn_copy = res.attn;
    Tensor<T> attn = std::move(res.attn);
    return g.make(std::move(res.out), {q, k, v}, [=](Graph<T>& gg, int self) {
        kernels::nsa_attend_backward(gg.val(q), gg.val(k), gg.val(v), attn, kwin,
                                     gg.grad(self), gg.grad_sink(q), gg.grad_sink(k),
                                     gg.grad_sink(v));
    });
}

template <typename T>
int nsa_attend_biased(Graph<T>& g, int q, int k, int v, int kwin, int pos_bias) {
    kernels::NsaResult<T> res =
        kernels::nsa_attend_forward(g.val(q), g.val(k), g.val(v), kwin, &g.val(pos_bias));
    Tensor<T> attn = std::move(res.attn);
    return g.make(std::move(res.out), {q, k, v, pos_bias}, [=](Graph<T>& gg, int self) {
        kernels::nsa_attend_backward(gg.val(q), gg.val(k), gg.val(v), attn, kwin,
                                     gg.grad(self), gg.grad_sink(q), gg.grad_sink(k),
                                     gg.grad_sink(v), gg.grad_sink(pos_bias));
    });
}

template <typename T>
int gather_guidance(Graph<T>& g, int attn, int fv) {
    Tensor<T> out = kernels::gather_guidance_forward(g.val(attn), g.val(fv));
    return g.make(std::move(out), {attn, fv}, [=](Graph<T>& gg, int self) {
        kernels::gather_guidance_backward(gg.val(attn), gg.val(fv), gg.grad(self),
                                          gg.grad_sink(attn), gg.grad_sink(fv));
    });
}

template <typename T>
int mse(Graph<T>& g, int a, int b) {
    Tensor<T> out = kernels::mse_forward(g.val(a), g.val(b));
    return g.make(std::move(out), {a, b}, [=](Graph<T>& gg, int self) {
        kernels::mse_backward(gg.val(a), gg.val(b), gg.grad(self), gg.grad_sink(a),
                              gg.grad_sink(b));
    });
}

template <typename T>
int psnr_loss_from_mse(Graph<T>& g, int m) {
    Tensor<T> out = kernels::psnr_loss_from_mse_forward(g.val(m));
    return g.make(std::move(out), {m}, [=](Graph<T>& gg, int self) {
        kernels::psnr_loss_from_mse_backward(gg.val(m), gg.grad(self), gg.grad_sink(m));
    });
}

// loss = 10*log10(max(mean((a-b)^2), 1e-12)); equals -PSNR above the floor.
template <typename T>
int psnr_loss(Graph<T>& g, int restored, int clean) {
    return psnr_loss_from_mse(g, mse(g, restored, clean));
}

}  // namespace sgdf::ad::ops
