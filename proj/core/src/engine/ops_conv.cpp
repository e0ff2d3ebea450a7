#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

namespace {

std::int64_t conv_extent(std::int64_t in, int k, int stride, int pad, int dil) {
    return (in + 2 * static_cast<std::int64_t>(pad) - static_cast<std::int64_t>(dil) * (k - 1) - 1) / stride + 1;
}

inline std::int64_t wrap(std::int64_t i, std::int64_t n) {
    i %= n;
    return i < 0 ? i + n : i;
}

// col is [C*kh*kw, OH*OW] for one sample.
template <class T>
void im2col(const T* x, std::int64_t C, std::int64_t H, std::int64_t W, int kh, int kw, int stride, int pad,
            int dil, PadMode mode, std::int64_t OH, std::int64_t OW, T* col) {
    std::int64_t r = 0;
    for (std::int64_t c = 0; c < C; ++c) {
        const T* xc = x + c * H * W;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj, ++r) {
                T* crow = col + r * OH * OW;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    std::int64_t ih = oh * stride - pad + static_cast<std::int64_t>(ki) * dil;
                    if (mode == PadMode::Circular) ih = wrap(ih, H);
                    const bool row_ok = ih >= 0 && ih < H;
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        std::int64_t iw = ow * stride - pad + static_cast<std::int64_t>(kj) * dil;
                        if (mode == PadMode::Circular) iw = wrap(iw, W);
                        crow[oh * OW + ow] =
                            (row_ok && iw >= 0 && iw < W) ? xc[ih * W + iw] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_accum(const T* col, std::int64_t C, std::int64_t H, std::int64_t W, int kh, int kw, int stride,
                  int pad, int dil, PadMode mode, std::int64_t OH, std::int64_t OW, T* gx) {
    std::int64_t r = 0;
    for (std::int64_t c = 0; c < C; ++c) {
        T* gxc = gx + c * H * W;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj, ++r) {
                const T* crow = col + r * OH * OW;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    std::int64_t ih = oh * stride - pad + static_cast<std::int64_t>(ki) * dil;
                    if (mode == PadMode::Circular) ih = wrap(ih, H);
                    if (ih < 0 || ih >= H) continue;
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        std::int64_t iw = ow * stride - pad + static_cast<std::int64_t>(kj) * dil;
                        if (mode == PadMode::Circular) iw = wrap(iw, W);
                        if (iw < 0 || iw >= W) continue;
                        gxc[ih * W + iw] += crow[oh * OW + ow];
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias,
              const Conv2dOpts& o) {
    if (input.ndim() != 4 || kernel.ndim() != 4)
        throw std::invalid_argument("conv2d: input must be [N,C,H,W] and kernel [F,C,kh,kw], got " +
                                    shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    detail::check_same_dtype(input, kernel, "conv2d");
    const std::int64_t N = input.shape()[0], C = input.shape()[1], H = input.shape()[2], W = input.shape()[3];
    const std::int64_t F = kernel.shape()[0];
    const int kh = static_cast<int>(kernel.shape()[2]), kw = static_cast<int>(kernel.shape()[3]);
    if (kernel.shape()[1] != C)
        throw std::invalid_argument("conv2d: kernel channel mismatch " + shape_str(kernel.shape()) +
                                    " for input " + shape_str(input.shape()));
    if (o.stride < 1 || o.dilation < 1 || o.padding < 0) throw std::invalid_argument("conv2d: bad options");
    const std::int64_t OH = conv_extent(H, kh, o.stride, o.padding, o.dilation);
    const std::int64_t OW = conv_extent(W, kw, o.stride, o.padding, o.dilation);
    if (OH <= 0 || OW <= 0)
        throw std::invalid_argument("conv2d: non-positive output extent for input " + shape_str(input.shape()));
    if (bias) {
        detail::check_same_dtype(input, *bias, "conv2d");
        if (bias->ndim() != 1 || bias->shape()[0] != F)
            throw std::invalid_argument("conv2d: bias must be [F]");
    }

    Tensor out = make_result({N, F, OH, OW}, input.dtype());
    dispatch_dtype(input.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xv = input.data<T>();
        auto wv = kernel.data<T>();
        auto ov = out.data<T>();
        const std::int64_t ck = C * kh * kw;
        std::vector<T> col(static_cast<std::size_t>(ck * OH * OW));
        for (std::int64_t n = 0; n < N; ++n) {
            im2col<T>(xv.data() + n * C * H * W, C, H, W, kh, kw, o.stride, o.padding, o.dilation, o.pad_mode,
                      OH, OW, col.data());
            detail::gemm<T>(F, OH * OW, ck, wv.data(), col.data(), ov.data() + n * F * OH * OW, false);
        }
        if (bias) {
            auto bv = bias->data<T>();
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t f = 0; f < F; ++f) {
                    T* op = ov.data() + (n * F + f) * OH * OW;
                    const T b = bv[f];
                    for (std::int64_t i = 0; i < OH * OW; ++i) op[i] += b;
                }
        }
    });

    std::vector<Tensor> inputs{input, kernel};
    if (bias) inputs.push_back(*bias);
    Tensor bias_t = bias ? *bias : Tensor{};
    wire_backward(out, inputs, [input, kernel, bias_t, o, N, C, H, W, F, kh, kw, OH, OW](Node& self) {
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            const std::int64_t ck = C * kh * kw;
            const bool need_x = input.requires_grad();
            const bool need_w = kernel.requires_grad();
            const bool need_b = bias_t.defined() && bias_t.requires_grad();
            std::vector<T> col;
            if (need_x || need_w) col.resize(static_cast<std::size_t>(ck * OH * OW));
            if (need_x) input.node()->ensure_grad();
            if (need_w) kernel.node()->ensure_grad();
            if (need_b) bias_t.node()->ensure_grad();
            auto xv = input.data<T>();
            auto wv = kernel.data<T>();
            for (std::int64_t n = 0; n < N; ++n) {
                const T* gn = g.data() + n * F * OH * OW;
                if (need_w) {
                    // dW += dY * col^T   (recompute col)
                    im2col<T>(xv.data() + n * C * H * W, C, H, W, kh, kw, o.stride, o.padding, o.dilation,
                              o.pad_mode, OH, OW, col.data());
                    auto gw = kernel.node()->grad_buf<T>();
                    detail::gemm_nt<T>(F, ck, OH * OW, gn, col.data(), gw.data(), true);
                }
                if (need_x) {
                    // dcol = W^T * dY, then scatter back
                    detail::gemm_tn<T>(ck, OH * OW, F, wv.data(), gn, col.data(), false);
                    auto gx = input.node()->grad_buf<T>();
                    col2im_accum<T>(col.data(), C, H, W, kh, kw, o.stride, o.padding, o.dilation, o.pad_mode,
                                    OH, OW, gx.data() + n * C * H * W);
                }
                if (need_b) {
                    auto gb = bias_t.node()->grad_buf<T>();
                    for (std::int64_t f = 0; f < F; ++f) {
                        const T* gp = gn + f * OH * OW;
                        T acc = T(0);
                        for (std::int64_t i = 0; i < OH * OW; ++i) acc += gp[i];
                        gb[f] += acc;
                    }
                }
            }
        });
    });
    return out;
}

Tensor conv3d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias,
              const Conv3dOpts& o) {
    if (input.ndim() != 5 || kernel.ndim() != 5)
        throw std::invalid_argument("conv3d: input must be [N,C,T,H,W] and kernel [F,C,kt,kh,kw], got " +
                                    shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    detail::check_same_dtype(input, kernel, "conv3d");
    const std::int64_t N = input.shape()[0], C = input.shape()[1], Tt = input.shape()[2], H = input.shape()[3],
                       W = input.shape()[4];
    const std::int64_t F = kernel.shape()[0];
    const int kt = static_cast<int>(kernel.shape()[2]), kh = static_cast<int>(kernel.shape()[3]),
              kw = static_cast<int>(kernel.shape()[4]);
    if (kernel.shape()[1] != C) throw std::invalid_argument("conv3d: kernel channel mismatch");
    const std::int64_t OT = conv_extent(Tt, kt, o.stride_t, o.pad_t, 1);
    const std::int64_t OH = conv_extent(H, kh, o.stride_h, o.pad_h, 1);
    const std::int64_t OW = conv_extent(W, kw, o.stride_w, o.pad_w, 1);
    if (OT <= 0 || OH <= 0 || OW <= 0)
        throw std::invalid_argument("conv3d: non-positive output extent for input " + shape_str(input.shape()));
    if (bias) {
        detail::check_same_dtype(input, *bias, "conv3d");
        if (bias->ndim() != 1 || bias->shape()[0] != F) throw std::invalid_argument("conv3d: bias must be [F]");
    }

    const std::int64_t ck = C * kt * kh * kw;
    const std::int64_t opos = OT * OH * OW;

    auto fill_col = [=](const auto* x, auto* col) {
        using T = std::remove_cvref_t<decltype(*x)>;
        std::int64_t r = 0;
        for (std::int64_t c = 0; c < C; ++c) {
            const T* xc = x + c * Tt * H * W;
            for (int ka = 0; ka < kt; ++ka)
                for (int ki = 0; ki < kh; ++ki)
                    for (int kj = 0; kj < kw; ++kj, ++r) {
                        T* crow = col + r * opos;
                        std::int64_t p = 0;
                        for (std::int64_t ot = 0; ot < OT; ++ot) {
                            const std::int64_t it = ot * o.stride_t - o.pad_t + ka;
                            const bool t_ok = it >= 0 && it < Tt;
                            for (std::int64_t oh = 0; oh < OH; ++oh) {
                                const std::int64_t ih = oh * o.stride_h - o.pad_h + ki;
                                const bool h_ok = ih >= 0 && ih < H;
                                for (std::int64_t ow = 0; ow < OW; ++ow, ++p) {
                                    const std::int64_t iw = ow * o.stride_w - o.pad_w + kj;
                                    crow[p] = (t_ok && h_ok && iw >= 0 && iw < W)
                                                  ? xc[(it * H + ih) * W + iw]
                                                  : T(0);
                                }
                            }
                        }
                    }
        }
    };
    auto scatter_col = [=](const auto* col, auto* gx) {
        using T = std::remove_cvref_t<decltype(*gx)>;
        std::int64_t r = 0;
        for (std::int64_t c = 0; c < C; ++c) {
            T* gxc = gx + c * Tt * H * W;
            for (int ka = 0; ka < kt; ++ka)
                for (int ki = 0; ki < kh; ++ki)
                    for (int kj = 0; kj < kw; ++kj, ++r) {
                        const T* crow = col + r * opos;
                        std::int64_t p = 0;
                        for (std::int64_t ot = 0; ot < OT; ++ot) {
                            const std::int64_t it = ot * o.stride_t - o.pad_t + ka;
                            const bool t_ok = it >= 0 && it < Tt;
                            for (std::int64_t oh = 0; oh < OH; ++oh) {
                                const std::int64_t ih = oh * o.stride_h - o.pad_h + ki;
                                const bool h_ok = t_ok && ih >= 0 && ih < H;
                                for (std::int64_t ow = 0; ow < OW; ++ow, ++p) {
                                    const std::int64_t iw = ow * o.stride_w - o.pad_w + kj;
                                    if (h_ok && iw >= 0 && iw < W) gxc[(it * H + ih) * W + iw] += crow[p];
                                }
                            }
                        }
                    }
        }
    };

    Tensor out = make_result({N, F, OT, OH, OW}, input.dtype());
    dispatch_dtype(input.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xv = input.data<T>();
        auto wv = kernel.data<T>();
        auto ov = out.data<T>();
        std::vector<T> col(static_cast<std::size_t>(ck * opos));
        for (std::int64_t n = 0; n < N; ++n) {
            fill_col(xv.data() + n * C * Tt * H * W, col.data());
            detail::gemm<T>(F, opos, ck, wv.data(), col.data(), ov.data() + n * F * opos, false);
        }
        if (bias) {
            auto bv = bias->data<T>();
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t f = 0; f < F; ++f) {
                    T* op = ov.data() + (n * F + f) * opos;
                    const T b = bv[f];
                    for (std::int64_t i = 0; i < opos; ++i) op[i] += b;
                }
        }
    });

    std::vector<Tensor> inputs{input, kernel};
    if (bias) inputs.push_back(*bias);
    Tensor bias_t = bias ? *bias : Tensor{};
    wire_backward(out, inputs, [input, kernel, bias_t, fill_col, scatter_col, N, C, Tt, H, W, F, ck, opos](Node& self) {
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            const bool need_x = input.requires_grad();
            const bool need_w = kernel.requires_grad();
            const bool need_b = bias_t.defined() && bias_t.requires_grad();
            std::vector<T> col;
            if (need_x || need_w) col.resize(static_cast<std::size_t>(ck * opos));
            if (need_x) input.node()->ensure_grad();
            if (need_w) kernel.node()->ensure_grad();
            if (need_b) bias_t.node()->ensure_grad();
            auto xv = input.data<T>();
            auto wv = kernel.data<T>();
            for (std::int64_t n = 0; n < N; ++n) {
                const T* gn = g.data() + n * F * opos;
                if (need_w) {
                    fill_col(xv.data() + n * C * Tt * H * W, col.data());
                    auto gw = kernel.node()->grad_buf<T>();
                    detail::gemm_nt<T>(F, ck, opos, gn, col.data(), gw.data(), true);
                }
                if (need_x) {
                    detail::gemm_tn<T>(ck, opos, F, wv.data(), gn, col.data(), false);
                    auto gx = input.node()->grad_buf<T>();
                    scatter_col(col.data(), gx.data() + n * C * Tt * H * W);
                }
                if (need_b) {
                    auto gb = bias_t.node()->grad_buf<T>();
                    for (std::int64_t f = 0; f < F; ++f) {
                        const T* gp = gn + f * opos;
                        T acc = T(0);
                        for (std::int64_t i = 0; i < opos; ++i) acc += gp[i];
                        gb[f] += acc;
                    }
                }
            }
        });
    });
    return out;
}

} // namespace refcolor
