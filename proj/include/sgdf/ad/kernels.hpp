#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "sgdf/core/tensor.hpp"

// Primitive forward/backward math on plain tensors. Backward kernels
// ACCUMULATE into non-null sinks, which must be preallocated at the matching
// shape; pass nullptr to skip a branch that needs no gradient.
namespace sgdf::ad::kernels {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
T neg_inf() {
    return -std::numeric_limits<T>::infinity();
}

// ---------------------------------------------------------------- conv2d ---
// Weight layout (kh*kw, cin, cout): row-major flattening matches the im2col
// GEMM operand, so no repacking happens anywhere.

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void im2col(const Tensor<T>& x, int kh, int kw, int stride, int pad, std::vector<T>& col) {
    const int h = x.h(), w = x.w(), cin = x.c();
    const int ho = conv_out_extent(h, kh, stride, pad);
    const int wo = conv_out_extent(w, kw, stride, pad);
    const std::size_t k = static_cast<std::size_t>(kh) * kw * cin;
    col.assign(static_cast<std::size_t>(ho) * wo * k, T(0));
    std::size_t row = 0;
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox, ++row) {
            T* dst = col.data() + row * k;
            for (int ty = 0; ty < kh; ++ty) {
                const int iy = oy * stride + ty - pad;
                if (iy < 0 || iy >= h) continue;
                for (int tx = 0; tx < kw; ++tx) {
                    const int ix = ox * stride + tx - pad;
                    if (ix < 0 || ix >= w) continue;
                    const T* src = &x.at(iy, ix, 0);
                    T* d = dst + (static_cast<std::size_t>(ty) * kw + tx) * cin;
                    for (int ci = 0; ci < cin; ++ci) d[ci] = src[ci];
                }
            }
        }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                         int kh, int kw, int stride, int pad) {
    const int cin = x.c();
    const int cout = w.c();
    if (w.shape() != Shape{kh * kw, cin, cout})
        throw std::invalid_argument("conv2d: weight shape " + w.shape().str() +
                                    " does not match kernel " + std::to_string(kh) + "x" +
                                    std::to_string(kw) + " cin=" + std::to_string(cin));
    if (b.shape() != Shape{1, 1, cout})
        throw std::invalid_argument("conv2d: bias shape mismatch");
    const int ho = conv_out_extent(x.h(), kh, stride, pad);
    const int wo = conv_out_extent(x.w(), kw, stride, pad);
    Tensor<T> out(Shape{ho, wo, cout});
    const long rows = static_cast<long>(ho) * wo;
    const long kdim = static_cast<long>(kh) * kw * cin;
    ConstMatMap<T> wmat(w.data(), kdim, cout);
    MatMap<T> omat(out.data(), rows, cout);
    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        ConstMatMap<T> xmat(x.data(), rows, cin);
        omat.noalias() = xmat * wmat;
    } else {
        std::vector<T> col;
        im2col(x, kh, kw, stride, pad, col);
        ConstMatMap<T> cmat(col.data(), rows, kdim);
        omat.noalias() = cmat * wmat;
    }
    ConstMatMap<T> bmat(b.data(), 1, cout);
    omat.rowwise() += bmat.row(0);
    return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& d_out,
                     int kh, int kw, int stride, int pad,
                     Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
    const int cin = x.c();
    const int cout = w.c();
    const int ho = d_out.h(), wo = d_out.w();
    const long rows = static_cast<long>(ho) * wo;
    const long kdim = static_cast<long>(kh) * kw * cin;
    ConstMatMap<T> gmat(d_out.data(), rows, cout);
    if (db) {
        // Fixed row-order fold. Eigen's colwise().sum() reorders the adds
        // depending on the buffer's alignment phase, which breaks bitwise
        // run-to-run reproducibility.
        T* dbp = db->data();
        const T* gp = d_out.data();
        for (long r = 0; r < rows; ++r)
            for (int j = 0; j < cout; ++j) dbp[j] += gp[r * cout + j];
    }
    const bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;
    if (pointwise) {
        ConstMatMap<T> xmat(x.data(), rows, cin);
        if (dw) {
            MatMap<T> dwm(dw->data(), kdim, cout);
            dwm.noalias() += xmat.transpose() * gmat;
        }
        if (dx) {
            ConstMatMap<T> wmat(w.data(), kdim, cout);
            MatMap<T> dxm(dx->data(), rows, cin);
            dxm.noalias() += gmat * wmat.transpose();
        }
        return;
    }
    std::vector<T> col;
    if (dw) {
        im2col(x, kh, kw, stride, pad, col);
        ConstMatMap<T> cmat(col.data(), rows, kdim);
        MatMap<T> dwm(dw->data(), kdim, cout);
        dwm.noalias() += cmat.transpose() * gmat;
    }
    if (dx) {
        ConstMatMap<T> wmat(w.data(), kdim, cout);
        std::vector<T> dcol(static_cast<std::size_t>(rows) * kdim);
        MatMap<T> dcm(dcol.data(), rows, kdim);
        dcm.noalias() = gmat * wmat.transpose();
        const int h = x.h(), iw = x.w();
        std::size_t row = 0;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox, ++row) {
                const T* src = dcol.data() + row * kdim;
                for (int ty = 0; ty < kh; ++ty) {
                    const int iy = oy * stride + ty - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int tx = 0; tx < kw; ++tx) {
                        const int ix = ox * stride + tx - pad;
                        if (ix < 0 || ix >= iw) continue;
                        const T* s = src + (static_cast<std::size_t>(ty) * kw + tx) * cin;
                        T* d = &dx->at(iy, ix, 0);
                        for (int ci = 0; ci < cin; ++ci) d[ci] += s[ci];
                    }
                }
            }
    }
}

// ----------------------------------------------------- depthwise 3x3 conv ---
// Weight (9, 1, c), stride 1, zero padding 1.

template <typename T>
Tensor<T> dwconv3_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const int h = x.h(), wd = x.w(), c = x.c();
    if (w.shape() != Shape{9, 1, c} || b.shape() != Shape{1, 1, c})
        throw std::invalid_argument("dwconv3: weight/bias shape mismatch for c=" +
                                    std::to_string(c));
    Tensor<T> out(x.shape());
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
            T* o = &out.at(y, xx, 0);
            for (int ci = 0; ci < c; ++ci) o[ci] = b[static_cast<std::size_t>(ci)];
            for (int t = 0; t < 9; ++t) {
                const int iy = y + t / 3 - 1;
                const int ix = xx + t % 3 - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                const T* src = &x.at(iy, ix, 0);
                const T* wt = &w.at(t, 0, 0);
                for (int ci = 0; ci < c; ++ci) o[ci] += wt[ci] * src[ci];
            }
        }
    return out;
}

template <typename T>
void dwconv3_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& d_out,
                      Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
    const int h = x.h(), wd = x.w(), c = x.c();
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
            const T* g = &d_out.at(y, xx, 0);
            if (db) {
                T* d = db->data();
                for (int ci = 0; ci < c; ++ci) d[ci] += g[ci];
            }
            for (int t = 0; t < 9; ++t) {
                const int iy = y + t / 3 - 1;
                const int ix = xx + t % 3 - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                if (dw) {
                    const T* src = &x.at(iy, ix, 0);
                    T* d = &dw->at(t, 0, 0);
                    for (int ci = 0; ci < c; ++ci) d[ci] += src[ci] * g[ci];
                }
                if (dx) {
                    const T* wt = &w.at(t, 0, 0);
                    T* d = &dx->at(iy, ix, 0);
                    for (int ci = 0; ci < c; ++ci) d[ci] += wt[ci] * g[ci];
                }
            }
        }
}

// -------------------------------------------------------------- layernorm ---
// Normalizes over the channel axis at each spatial position.

inline constexpr double kLnEps = 1e-6;

template <typename T>
Tensor<T> layernorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
    const int c = x.c();
    if (gamma.shape() != Shape{1, 1, c} || beta.shape() != Shape{1, 1, c})
        throw std::invalid_argument("layernorm: affine shape mismatch");
    Tensor<T> out(x.shape());
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        T* po = out.data() + p * c;
        double mu = 0;
        for (int ci = 0; ci < c; ++ci) mu += static_cast<double>(px[ci]);
        mu /= c;
        double var = 0;
        for (int ci = 0; ci < c; ++ci) {
            const double d = static_cast<double>(px[ci]) - mu;
            var += d * d;
        }
        var /= c;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        for (int ci = 0; ci < c; ++ci)
            po[ci] = static_cast<T>((static_cast<double>(px[ci]) - mu) * rstd *
                                    static_cast<double>(gamma[static_cast<std::size_t>(ci)])) +
                     beta[static_cast<std::size_t>(ci)];
    }
    return out;
}

template <typename T>
void layernorm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& d_out,
                        Tensor<T>* dx, Tensor<T>* dgamma, Tensor<T>* dbeta) {
    const int c = x.c();
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    std::vector<double> xhat(static_cast<std::size_t>(c));
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        const T* g = d_out.data() + p * c;
        double mu = 0;
        for (int ci = 0; ci < c; ++ci) mu += static_cast<double>(px[ci]);
        mu /= c;
        double var = 0;
        for (int ci = 0; ci < c; ++ci) {
            const double d = static_cast<double>(px[ci]) - mu;
            var += d * d;
        }
        var /= c;
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        for (int ci = 0; ci < c; ++ci)
            xhat[static_cast<std::size_t>(ci)] = (static_cast<double>(px[ci]) - mu) * rstd;
        if (dgamma)
            for (int ci = 0; ci < c; ++ci)
                (*dgamma)[static_cast<std::size_t>(ci)] +=
                    static_cast<T>(static_cast<double>(g[ci]) * xhat[static_cast<std::size_t>(ci)]);
        if (dbeta)
            for (int ci = 0; ci < c; ++ci) (*dbeta)[static_cast<std::size_t>(ci)] += g[ci];
        if (dx) {
            double mean_dg = 0, mean_dgx = 0;
            for (int ci = 0; ci < c; ++ci) {
                const double dg = static_cast<double>(g[ci]) *
                                  static_cast<double>(gamma[static_cast<std::size_t>(ci)]);
                mean_dg += dg;
                mean_dgx += dg * xhat[static_cast<std::size_t>(ci)];
            }
            mean_dg /= c;
            mean_dgx /= c;
            T* d = dx->data() + p * c;
            for (int ci = 0; ci < c; ++ci) {
                const double dg = static_cast<double>(g[ci]) *
                                  static_cast<double>(gamma[static_cast<std::size_t>(ci)]);
                d[ci] += static_cast<T>(
                    rstd * (dg - mean_dg - xhat[static_cast<std::size_t>(ci)] * mean_dgx));
            }
        }
    }
}

// ----------------------------------------------------- pointwise functions ---

template <typename T>
Tensor<T> gelu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = static_cast<double>(x[i]);
        out[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * 0.7071067811865476)));
    }
    return out;
}

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = static_cast<double>(x[i]);
        const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865476));
        const double pdf = 0.3989422804014327 * std::exp(-0.5 * v * v);
        (*dx)[i] += static_cast<T>(static_cast<double>(d_out[i]) * (cdf + v * pdf));
    }
}

// y has the forward output; derivative expressed through it.
template <typename T>
void tanh_backward(const Tensor<T>& y, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    for (std::size_t i = 0; i < y.size(); ++i) (*dx)[i] += d_out[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    for (std::size_t i = 0; i < y.size(); ++i) (*dx)[i] += d_out[i] * y[i] * (T(1) - y[i]);
}

// SimpleGate: split channels in half, multiply the halves.
template <typename T>
Tensor<T> simple_gate_forward(const Tensor<T>& x) {
    const int c = x.c();
    if (c % 2 != 0) throw std::invalid_argument("simple_gate: odd channel count");
    const int ch = c / 2;
    Tensor<T> out(Shape{x.h(), x.w(), ch});
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        T* po = out.data() + p * ch;
        for (int ci = 0; ci < ch; ++ci) po[ci] = px[ci] * px[ci + ch];
    }
    return out;
}

template <typename T>
void simple_gate_backward(const Tensor<T>& x, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int c = x.c();
    const int ch = c / 2;
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        const T* g = d_out.data() + p * ch;
        T* d = dx->data() + p * c;
        for (int ci = 0; ci < ch; ++ci) {
            d[ci] += g[ci] * px[ci + ch];
            d[ci + ch] += g[ci] * px[ci];
        }
    }
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
    const int c = x.c();
    Tensor<T> out(Shape{1, 1, c});
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        for (int ci = 0; ci < c; ++ci) acc[static_cast<std::size_t>(ci)] += px[ci];
    }
    for (int ci = 0; ci < c; ++ci)
        out[static_cast<std::size_t>(ci)] =
            static_cast<T>(acc[static_cast<std::size_t>(ci)] / static_cast<double>(npix));
    return out;
}

template <typename T>
void global_avg_pool_backward(const Shape& xshape, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int c = xshape.c;
    const std::size_t npix = static_cast<std::size_t>(xshape.h) * xshape.w;
    const T inv = static_cast<T>(1.0 / static_cast<double>(npix));
    for (std::size_t p = 0; p < npix; ++p) {
        T* d = dx->data() + p * c;
        for (int ci = 0; ci < c; ++ci) d[ci] += d_out[static_cast<std::size_t>(ci)] * inv;
    }
}

// out = x * broadcast(s) with s of shape (1, 1, c).
template <typename T>
Tensor<T> channel_scale_forward(const Tensor<T>& x, const Tensor<T>& s) {
    const int c = x.c();
    if (s.shape() != Shape{1, 1, c})
        throw std::invalid_argument("channel_scale: scale shape mismatch");
    Tensor<T> out(x.shape());
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        T* po = out.data() + p * c;
        for (int ci = 0; ci < c; ++ci) po[ci] = px[ci] * s[static_cast<std::size_t>(ci)];
    }
    return out;
}

template <typename T>
void channel_scale_backward(const Tensor<T>& x, const Tensor<T>& s, const Tensor<T>& d_out,
                            Tensor<T>* dx, Tensor<T>* ds) {
    const int c = x.c();
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        const T* g = d_out.data() + p * c;
        if (dx) {
            T* d = dx->data() + p * c;
            for (int ci = 0; ci < c; ++ci) d[ci] += g[ci] * s[static_cast<std::size_t>(ci)];
        }
        if (ds)
            for (int ci = 0; ci < c; ++ci) (*ds)[static_cast<std::size_t>(ci)] += g[ci] * px[ci];
    }
}

// ------------------------------------------------------- shape rearrangers ---

template <typename T>
Tensor<T> channel_concat_forward(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.h() != b.h() || a.w() != b.w())
        throw std::invalid_argument("channel_concat: spatial dims differ");
    Tensor<T> out(Shape{a.h(), a.w(), a.c() + b.c()});
    const std::size_t npix = static_cast<std::size_t>(a.h()) * a.w();
    for (std::size_t p = 0; p < npix; ++p) {
        T* po = out.data() + p * (a.c() + b.c());
        const T* pa = a.data() + p * a.c();
        const T* pb = b.data() + p * b.c();
        for (int ci = 0; ci < a.c(); ++ci) po[ci] = pa[ci];
        for (int ci = 0; ci < b.c(); ++ci) po[a.c() + ci] = pb[ci];
    }
    return out;
}

template <typename T>
void channel_concat_backward(int ca, int cb, const Tensor<T>& d_out, Tensor<T>* da,
                             Tensor<T>* db) {
    const std::size_t npix = static_cast<std::size_t>(d_out.h()) * d_out.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* g = d_out.data() + p * (ca + cb);
        if (da) {
            T* d = da->data() + p * ca;
            for (int ci = 0; ci < ca; ++ci) d[ci] += g[ci];
        }
        if (db) {
            T* d = db->data() + p * cb;
            for (int ci = 0; ci < cb; ++ci) d[ci] += g[ca + ci];
        }
    }
}

template <typename T>
Tensor<T> channel_slice_forward(const Tensor<T>& x, int c0, int len) {
    if (c0 < 0 || len <= 0 || c0 + len > x.c())
        throw std::invalid_argument("channel_slice: range outside channels");
    Tensor<T> out(Shape{x.h(), x.w(), len});
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * x.c() + c0;
        T* po = out.data() + p * len;
        for (int ci = 0; ci < len; ++ci) po[ci] = px[ci];
    }
    return out;
}

template <typename T>
void channel_slice_backward(int cin, int c0, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int len = d_out.c();
    const std::size_t npix = static_cast<std::size_t>(d_out.h()) * d_out.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* g = d_out.data() + p * len;
        T* d = dx->data() + p * cin + c0;
        for (int ci = 0; ci < len; ++ci) d[ci] += g[ci];
    }
}

// (h, w, 4c) -> (2h, 2w, c); input channel index = c_out*4 + dy*2 + dx.
template <typename T>
Tensor<T> pixel_shuffle2_forward(const Tensor<T>& x) {
    if (x.c() % 4 != 0) throw std::invalid_argument("pixel_shuffle2: channels not divisible by 4");
    const int c = x.c() / 4;
    Tensor<T> out(Shape{2 * x.h(), 2 * x.w(), c});
    for (int y = 0; y < x.h(); ++y)
        for (int xx = 0; xx < x.w(); ++xx)
            for (int dy = 0; dy < 2; ++dy)
                for (int dxp = 0; dxp < 2; ++dxp) {
                    T* po = &out.at(2 * y + dy, 2 * xx + dxp, 0);
                    const T* px = &x.at(y, xx, 0);
                    for (int ci = 0; ci < c; ++ci) po[ci] = px[ci * 4 + dy * 2 + dxp];
                }
    return out;
}

template <typename T>
void pixel_shuffle2_backward(const Shape& xshape, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int c = xshape.c / 4;
    for (int y = 0; y < xshape.h; ++y)
        for (int xx = 0; xx < xshape.w; ++xx)
            for (int dy = 0; dy < 2; ++dy)
                for (int dxp = 0; dxp < 2; ++dxp) {
                    const T* g = &d_out.at(2 * y + dy, 2 * xx + dxp, 0);
                    T* d = &dx->at(y, xx, 0);
                    for (int ci = 0; ci < c; ++ci) d[ci * 4 + dy * 2 + dxp] += g[ci];
                }
}

// Bilinear x2 upsample with half-pixel centers and replicated borders.
template <typename T>
Tensor<T> bilinear_up2_forward(const Tensor<T>& x) {
    const int h = x.h(), w = x.w(), c = x.c();
    Tensor<T> out(Shape{2 * h, 2 * w, c});
    for (int oy = 0; oy < 2 * h; ++oy) {
        const double sy = (oy + 0.5) * 0.5 - 0.5;
        const int fy = static_cast<int>(std::floor(sy));
        const double ty = sy - fy;
        const int y0 = std::min(std::max(fy, 0), h - 1);
        const int y1 = std::min(std::max(fy + 1, 0), h - 1);
        for (int ox = 0; ox < 2 * w; ++ox) {
            const double sx = (ox + 0.5) * 0.5 - 0.5;
            const int fx = static_cast<int>(std::floor(sx));
            const double tx = sx - fx;
            const int x0 = std::min(std::max(fx, 0), w - 1);
            const int x1 = std::min(std::max(fx + 1, 0), w - 1);
            const T* p00 = &x.at(y0, x0, 0);
            const T* p01 = &x.at(y0, x1, 0);
            const T* p10 = &x.at(y1, x0, 0);
            const T* p11 = &x.at(y1, x1, 0);
            T* po = &out.at(oy, ox, 0);
            for (int ci = 0; ci < c; ++ci)
                po[ci] = static_cast<T>((1 - ty) * ((1 - tx) * p00[ci] + tx * p01[ci]) +
                                        ty * ((1 - tx) * p10[ci] + tx * p11[ci]));
        }
    }
    return out;
}

template <typename T>
void bilinear_up2_backward(const Shape& xshape, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int h = xshape.h, w = xshape.w, c = xshape.c;
    for (int oy = 0; oy < 2 * h; ++oy) {
        const double sy = (oy + 0.5) * 0.5 - 0.5;
        const int fy = static_cast<int>(std::floor(sy));
        const double ty = sy - fy;
        const int y0 = std::min(std::max(fy, 0), h - 1);
        const int y1 = std::min(std::max(fy + 1, 0), h - 1);
        for (int ox = 0; ox < 2 * w; ++ox) {
            const double sx = (ox + 0.5) * 0.5 - 0.5;
            const int fx = static_cast<int>(std::floor(sx));
            const double tx = sx - fx;
            const int x0 = std::min(std::max(fx, 0), w - 1);
            const int x1 = std::min(std::max(fx + 1, 0), w - 1);
            const T* g = &d_out.at(oy, ox, 0);
            T* p00 = &dx->at(y0, x0, 0);
            T* p01 = &dx->at(y0, x1, 0);
            T* p10 = &dx->at(y1, x0, 0);
            T* p11 = &dx->at(y1, x1, 0);
            for (int ci = 0; ci < c; ++ci) {
                const double gv = static_cast<double>(g[ci]);
                p00[ci] += static_cast<T>((1 - ty) * (1 - tx) * gv);
                p01[ci] += static_cast<T>((1 - ty) * tx * gv);
                p10[ci] += static_cast<T>(ty * (1 - tx) * gv);
                p11[ci] += static_cast<T>(ty * tx * gv);
            }
        }
    }
}

// ------------------------------------------------------ attention kernels ---

// scores(h, w, d) = <fq(h, w), fk(h, w-d)> / sqrt(c); bins with w-d < 0 get a
// -inf sentinel. Shared by the coarse NRCA map and the pixel-level vanilla
// attention baseline.
template <typename T>
Tensor<T> attention_scores_forward(const Tensor<T>& fq, const Tensor<T>& fk, int nbins) {
    if (fq.shape() != fk.shape())
        throw std::invalid_argument("attention_scores: query/key shape mismatch " +
                                    fq.shape().str() + " vs " + fk.shape().str());
    if (nbins < 1) throw std::invalid_argument("attention_scores: nbins must be >= 1");
    const int h = fq.h(), w = fq.w(), c = fq.c();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
    Tensor<T> out(Shape{h, w, nbins});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* q = &fq.at(y, x, 0);
            T* o = &out.at(y, x, 0);
            const int dmax = std::min(nbins - 1, x);
            for (int d = 0; d <= dmax; ++d) {
                const T* k = &fk.at(y, x - d, 0);
                T acc = T(0);
                for (int ci = 0; ci < c; ++ci) acc += q[ci] * k[ci];
                o[d] = acc * scale;
            }
            for (int d = dmax + 1; d < nbins; ++d) o[d] = neg_inf<T>();
        }
    return out;
}

template <typename T>
void attention_scores_backward(const Tensor<T>& fq, const Tensor<T>& fk,
                               const Tensor<T>& d_scores, Tensor<T>* dfq, Tensor<T>* dfk) {
    const int h = fq.h(), w = fq.w(), c = fq.c();
    const int nbins = d_scores.c();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* g = &d_scores.at(y, x, 0);
            const int dmax = std::min(nbins - 1, x);
            for (int d = 0; d <= dmax; ++d) {
                const T gv = g[d] * scale;
                if (gv == T(0)) continue;
                if (dfq) {
                    const T* k = &fk.at(y, x - d, 0);
                    T* dq = &dfq->at(y, x, 0);
                    for (int ci = 0; ci < c; ++ci) dq[ci] += gv * k[ci];
                }
                if (dfk) {
                    const T* q = &fq.at(y, x, 0);
                    T* dk = &dfk->at(y, x - d, 0);
                    for (int ci = 0; ci < c; ++ci) dk[ci] += gv * q[ci];
                }
            }
        }
}

// Softmax over the channel (disparity) axis. -inf logits get exactly zero
// weight; an all--inf pixel yields an all-zero row rather than NaN.
template <typename T>
Tensor<T> masked_softmax_forward(const Tensor<T>& x) {
    const int c = x.c();
    Tensor<T> out(x.shape());
    const std::size_t npix = static_cast<std::size_t>(x.h()) * x.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* px = x.data() + p * c;
        T* po = out.data() + p * c;
        T m = neg_inf<T>();
        for (int ci = 0; ci < c; ++ci) m = std::max(m, px[ci]);
        if (!std::isfinite(static_cast<double>(m))) {
            for (int ci = 0; ci < c; ++ci) po[ci] = T(0);
            continue;
        }
        double sum = 0;
        for (int ci = 0; ci < c; ++ci) {
            const double e = std::isfinite(static_cast<double>(px[ci]))
                                 ? std::exp(static_cast<double>(px[ci] - m))
                                 : 0.0;
            po[ci] = static_cast<T>(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int ci = 0; ci < c; ++ci) po[ci] = static_cast<T>(static_cast<double>(po[ci]) * inv);
    }
    return out;
}

template <typename T>
void masked_softmax_backward(const Tensor<T>& y, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int c = y.c();
    const std::size_t npix = static_cast<std::size_t>(y.h()) * y.w();
    for (std::size_t p = 0; p < npix; ++p) {
        const T* py = y.data() + p * c;
        const T* g = d_out.data() + p * c;
        T* d = dx->data() + p * c;
        double dot = 0;
        for (int ci = 0; ci < c; ++ci) dot += static_cast<double>(py[ci]) * g[ci];
        for (int ci = 0; ci < c; ++ci)
            d[ci] += static_cast<T>(static_cast<double>(py[ci]) *
                                    (static_cast<double>(g[ci]) - dot));
    }
}

// Replaces non-finite entries with zero so the propagation network never sees
// the -inf boundary sentinels. Gradient passes through finite entries only.
template <typename T>
Tensor<T> sanitize_forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = std::isfinite(static_cast<double>(x[i])) ? x[i] : T(0);
    return out;
}

template <typename T>
void sanitize_backward(const Tensor<T>& x, const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isfinite(static_cast<double>(x[i]))) (*dx)[i] += d_out[i];
}

// Re-applies the epipolar boundary: bins with w - d < 0 become -inf.
template <typename T>
Tensor<T> mask_invalid_forward(const Tensor<T>& x) {
    Tensor<T> out = x;
    const int nbins = x.c();
    for (int y = 0; y < x.h(); ++y)
        for (int xx = 0; xx < x.w(); ++xx)
            for (int d = xx + 1; d < nbins; ++d) out.at(y, xx, d) = neg_inf<T>();
    return out;
}

template <typename T>
void mask_invalid_backward(const Tensor<T>& d_out, Tensor<T>* dx) {
    if (!dx) return;
    const int nbins = d_out.c();
    for (int y = 0; y < d_out.h(); ++y)
        for (int xx = 0; xx < d_out.w(); ++xx) {
            const T* g = &d_out.at(y, xx, 0);
            T* d = &dx->at(y, xx, 0);
            const int dmax = std::min(nbins - 1, xx);
            for (int di = 0; di <= dmax; ++di) d[di] += g[di];
        }
}

// ---------------------------------------------- neighborhood self-attention ---
// Windowed single-head attention over projected q/k/v (Eq. 9 shape). The
// boundary truncates the window to in-image positions.

template <typename T>
struct NsaResult {
    Tensor<T> out;
    Tensor<T> attn;  // (h, w, k*k), zero at out-of-image slots
};

template <typename T>
NsaResult<T> nsa_attend_forward(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                int kwin, const Tensor<T>* pos_bias = nullptr) {
    if (kwin < 1 || kwin % 2 == 0)
        throw std::invalid_argument("nsa: window size must be odd and positive, got " +
                                    std::to_string(kwin));
    if (q.shape() != k.shape() || q.shape() != v.shape())
        throw std::invalid_argument("nsa: q/k/v shape mismatch");
    if (pos_bias && pos_bias->shape() != Shape{1, 1, kwin * kwin})
        throw std::invalid_argument("nsa: positional bias must have k*k entries");
    const int h = q.h(), w = q.w(), c = q.c();
    const int r = kwin / 2;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
    NsaResult<T> res;
    res.out = Tensor<T>(q.shape());
    res.attn = Tensor<T>(Shape{h, w, kwin * kwin});
    std::vector<double> logits(static_cast<std::size_t>(kwin) * kwin);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* pq = &q.at(y, x, 0);
            double m = -std::numeric_limits<double>::infinity();
            for (int wy = -r; wy <= r; ++wy)
                for (int wx = -r; wx <= r; ++wx) {
                    const int iy = y + wy, ix = x + wx;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                    const T* pk = &k.at(iy, ix, 0);
                    double acc = 0;
                    for (int ci = 0; ci < c; ++ci)
                        acc += static_cast<double>(pq[ci]) * static_cast<double>(pk[ci]);
                    acc *= static_cast<double>(scale);
                    const int slot = (wy + r) * kwin + wx + r;
                    if (pos_bias) acc += static_cast<double>((*pos_bias)[static_cast<std::size_t>(slot)]);
                    logits[static_cast<std::size_t>(slot)] = acc;
                    m = std::max(m, acc);
                }
            double sum = 0;
            T* pa = &res.attn.at(y, x, 0);
            for (int wy = -r; wy <= r; ++wy)
                for (int wx = -r; wx <= r; ++wx) {
                    const int iy = y + wy, ix = x + wx;
                    const int slot = (wy + r) * kwin + wx + r;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                        pa[slot] = T(0);
                        continue;
                    }
                    const double e = std::exp(logits[static_cast<std::size_t>(slot)] - m);
                    pa[slot] = static_cast<T>(e);
                    sum += e;
                }
            const double inv = 1.0 / sum;
            T* po = &res.out.at(y, x, 0);
            for (int ci = 0; ci < c; ++ci) po[ci] = T(0);
            for (int wy = -r; wy <= r; ++wy)
                for (int wx = -r; wx <= r; ++wx) {
                    const int iy = y + wy, ix = x + wx;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                    const int slot = (wy + r) * kwin + wx + r;
                    pa[slot] = static_cast<T>(static_cast<double>(pa[slot]) * inv);
                    const T a = pa[slot];
                    const T* pv = &v.at(iy, ix, 0);
                    for (int ci = 0; ci < c; ++ci) po[ci] += a * pv[ci];
                }
        }
    return res;
}

template <typename T>
void nsa_attend_backward(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                         const Tensor<T>& attn, int kwin, const Tensor<T>& d_out,
                         Tensor<T>* dq, Tensor<T>* dk, Tensor<T>* dv,
                         Tensor<T>* dpos_bias = nullptr) {
    const int h = q.h(), w = q.w(), c = q.c();
    const int r = kwin / 2;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(c)));
    std::vector<double> da(static_cast<std::size_t>(kwin) * kwin);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* g = &d_out.at(y, x, 0);
            const T* pa = &attn.at(y, x, 0);
            double dot = 0;
            for (int wy = -r; wy <= r; ++wy)
                for (int wx = -r; wx <= r; ++wx) {
                    const int iy = y + wy, ix = x + wx;
                    const int slot = (wy + r) * kwin + wx + r;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                        da[static_cast<std::size_t>(slot)] = 0;
                        continue;
                    }
                    const T* pv = &v.at(iy, ix, 0);
                    double acc = 0;
                    for (int ci = 0; ci < c; ++ci)
                        acc += static_cast<double>(g[ci]) * static_cast<double>(pv[ci]);
                    da[static_cast<std::size_t>(slot)] = acc;
                    dot += acc * static_cast<double>(pa[slot]);
                    if (dv) {
                        T* d = &dv->at(iy, ix, 0);
                        const T a = pa[slot];
                        for (int ci = 0; ci < c; ++ci) d[ci] += a * g[ci];
                    }
                }
            const T* pq = &q.at(y, x, 0);
            for (int wy = -r; wy <= r; ++wy)
                for (int wx = -r; wx <= r; ++wx) {
                    const int iy = y + wy, ix = x + wx;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                    const int slot = (wy + r) * kwin + wx + r;
                    const double dlogit =
                        static_cast<double>(pa[slot]) * (da[static_cast<std::size_t>(slot)] - dot);
                    if (dlogit == 0) continue;
                    if (dpos_bias)
                        (*dpos_bias)[static_cast<std::size_t>(slot)] += static_cast<T>(dlogit);
                    const T dl = static_cast<T>(dlogit) * scale;
                    if (dq) {
                        const T* pk = &k.at(iy, ix, 0);
                        T* d = &dq->at(y, x, 0);
                        for (int ci = 0; ci < c; ++ci) d[ci] += dl * pk[ci];
                    }
                    if (dk) {
                        T* d = &dk->at(iy, ix, 0);
                        for (int ci = 0; ci < c; ++ci) d[ci] += dl * pq[ci];
                    }
                }
        }
}

// -------------------------------------------------------- guidance gather ---
// out(h, w) = sum_d attn(h, w, d) * fv(h, w-d); out-of-image terms are zero.
// Normalized attention puts zero weight there anyway; the guard keeps the
// gather well-defined for arbitrary inputs.

template <typename T>
Tensor<T> gather_guidance_forward(const Tensor<T>& attn, const Tensor<T>& fv) {
    if (attn.h() != fv.h() || attn.w() != fv.w())
        throw std::invalid_argument("gather_guidance: spatial dims differ");
    const int h = fv.h(), w = fv.w(), c = fv.c(), nbins = attn.c();
    Tensor<T> out(Shape{h, w, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            T* po = &out.at(y, x, 0);
            const T* pa = &attn.at(y, x, 0);
            const int dmax = std::min(nbins - 1, x);
            for (int d = 0; d <= dmax; ++d) {
                const T a = pa[d];
                if (a == T(0)) continue;
                const T* pv = &fv.at(y, x - d, 0);
                for (int ci = 0; ci < c; ++ci) po[ci] += a * pv[ci];
            }
        }
    return out;
}

template <typename T>
void gather_guidance_backward(const Tensor<T>& attn, const Tensor<T>& fv,
                              const Tensor<T>& d_out, Tensor<T>* dattn, Tensor<T>* dfv) {
    const int h = fv.h(), w = fv.w(), c = fv.c(), nbins = attn.c();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const T* g = &d_out.at(y, x, 0);
            const T* pa = &attn.at(y, x, 0);
            const int dmax = std::min(nbins - 1, x);
            for (int d = 0; d <= dmax; ++d) {
                const T* pv = &fv.at(y, x - d, 0);
                if (dattn) {
                    T acc = T(0);
                    for (int ci = 0; ci < c; ++ci) acc += g[ci] * pv[ci];
                    dattn->at(y, x, d) += acc;
                }
                if (dfv) {
                    const T a = pa[d];
                    if (a == T(0)) continue;
                    T* d2 = &dfv->at(y, x - d, 0);
                    for (int ci = 0; ci < c; ++ci) d2[ci] += a * g[ci];
                }
            }
        }
}

// ------------------------------------------------------------------- loss ---

template <typename T>
Tensor<T> mse_forward(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("mse: shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    Tensor<T> out(Shape{1, 1, 1});
    out[0] = static_cast<T>(acc / static_cast<double>(a.size()));
    return out;
}

template <typename T>
void mse_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& d_out,
                  Tensor<T>* da, Tensor<T>* db) {
    const T g = d_out[0] * static_cast<T>(2.0 / static_cast<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T d = (a[i] - b[i]) * g;
        if (da) (*da)[i] += d;
        if (db) (*db)[i] -= d;
    }
}

inline constexpr double kMseFloor = 1e-12;

// loss = 10*log10(max(mse, 1e-12)) = -PSNR, floored at -120 dB.
template <typename T>
Tensor<T> psnr_loss_from_mse_forward(const Tensor<T>& mse) {
    Tensor<T> out(Shape{1, 1, 1});
    const double m = std::max(static_cast<double>(mse[0]), kMseFloor);
    out[0] = static_cast<T>(10.0 * std::log10(m));
    return out;
}

template <typename T>
void psnr_loss_from_mse_backward(const Tensor<T>& mse, const Tensor<T>& d_out, Tensor<T>* dm) {
    if (!dm) return;
    const double m = static_cast<double>(mse[0]);
    if (m > kMseFloor) (*dm)[0] += static_cast<T>(static_cast<double>(d_out[0]) *
                                                  10.0 / (m * 2.302585092994046));
}

}  // namespace sgdf::ad::kernels
