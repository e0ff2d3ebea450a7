#include <algorithm>
#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

Tensor reshape(const Tensor& x, std::vector<std::int64_t> new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                                    shape_str(new_shape));
    Tensor out = make_result(std::move(new_shape), x.dtype());
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        std::copy(src.begin(), src.end(), dst.begin());
    });
    wire_backward(out, {x}, [x](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            detail::accumulate_grad<T>(*x.node(), self.grad_buf<T>());
        });
    });
    return out;
}

Tensor permute(const Tensor& x, std::vector<int> perm) {
    const int nd = x.ndim();
    if (static_cast<int>(perm.size()) != nd) throw std::invalid_argument("permute: perm size != rank");
    std::vector<bool> seen(static_cast<std::size_t>(nd), false);
    for (int p : perm) {
        if (p < 0 || p >= nd || seen[static_cast<std::size_t>(p)])
            throw std::invalid_argument("permute: invalid permutation");
        seen[static_cast<std::size_t>(p)] = true;
    }
    std::vector<std::int64_t> out_shape(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i) out_shape[static_cast<std::size_t>(i)] = x.shape()[static_cast<std::size_t>(perm[i])];
    Tensor out = make_result(out_shape, x.dtype());

    const auto in_strides = detail::strides_of(x.shape());
    std::vector<std::int64_t> gather(static_cast<std::size_t>(nd));
    for (int i = 0; i < nd; ++i) gather[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(perm[i])];

    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
        std::int64_t si = 0;
        for (std::size_t o = 0; o < dst.size(); ++o) {
            dst[o] = src[si];
            for (int d = nd - 1; d >= 0; --d) {
                ++idx[static_cast<std::size_t>(d)];
                si += gather[static_cast<std::size_t>(d)];
                if (idx[static_cast<std::size_t>(d)] < out_shape[static_cast<std::size_t>(d)]) break;
                idx[static_cast<std::size_t>(d)] = 0;
                si -= gather[static_cast<std::size_t>(d)] * out_shape[static_cast<std::size_t>(d)];
            }
        }
    });
    wire_backward(out, {x}, [x, out_shape, gather, nd](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
            std::int64_t si = 0;
            for (std::size_t o = 0; o < g.size(); ++o) {
                gx[si] += g[o];
                for (int d = nd - 1; d >= 0; --d) {
                    ++idx[static_cast<std::size_t>(d)];
                    si += gather[static_cast<std::size_t>(d)];
                    if (idx[static_cast<std::size_t>(d)] < out_shape[static_cast<std::size_t>(d)]) break;
                    idx[static_cast<std::size_t>(d)] = 0;
                    si -= gather[static_cast<std::size_t>(d)] * out_shape[static_cast<std::size_t>(d)];
                }
            }
        });
    });
    return out;
}

namespace {

// Views axis `axis` as (outer, extent, inner) for contiguous block copies.
struct AxisSplit {
    std::int64_t outer, extent, inner;
};

AxisSplit split_axis(const std::vector<std::int64_t>& shape, int axis) {
    AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

} // namespace

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
    if (axis < 0 || axis >= x.ndim()) throw std::invalid_argument("slice: axis out of range");
    const auto extent = x.shape()[static_cast<std::size_t>(axis)];
    if (start < 0 || length <= 0 || start + length > extent)
        throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + length) + ") outside extent " + std::to_string(extent));
    auto out_shape = x.shape();
    out_shape[static_cast<std::size_t>(axis)] = length;
    Tensor out = make_result(out_shape, x.dtype());
    const auto s = split_axis(x.shape(), axis);
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        for (std::int64_t o = 0; o < s.outer; ++o) {
            const T* sp = src.data() + (o * s.extent + start) * s.inner;
            T* dp = dst.data() + o * length * s.inner;
            std::copy(sp, sp + length * s.inner, dp);
        }
    });
    wire_backward(out, {x}, [x, s, start, length](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            for (std::int64_t o = 0; o < s.outer; ++o) {
                T* dp = gx.data() + (o * s.extent + start) * s.inner;
                const T* sp = g.data() + o * length * s.inner;
                for (std::int64_t i = 0; i < length * s.inner; ++i) dp[i] += sp[i];
            }
        });
    });
    return out;
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    const auto& first = xs.front();
    if (axis < 0 || axis >= first.ndim()) throw std::invalid_argument("concat: axis out of range");
    std::int64_t total = 0;
    for (const auto& t : xs) {
        if (t.ndim() != first.ndim() || t.dtype() != first.dtype())
            throw std::invalid_argument("concat: rank or dtype mismatch");
        for (int d = 0; d < first.ndim(); ++d)
            if (d != axis && t.shape()[static_cast<std::size_t>(d)] != first.shape()[static_cast<std::size_t>(d)])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(t.shape()) + " vs " +
                                            shape_str(first.shape()));
        total += t.shape()[static_cast<std::size_t>(axis)];
    }
    auto out_shape = first.shape();
    out_shape[static_cast<std::size_t>(axis)] = total;
    Tensor out = make_result(out_shape, first.dtype());
    const auto so = split_axis(out_shape, axis);
    dispatch_dtype(first.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto dst = out.data<T>();
        std::int64_t offset = 0;
        for (const auto& t : xs) {
            const auto st = split_axis(t.shape(), axis);
            auto src = t.data<T>();
            for (std::int64_t o = 0; o < st.outer; ++o) {
                const T* sp = src.data() + o * st.extent * st.inner;
                T* dp = dst.data() + (o * so.extent + offset) * so.inner;
                std::copy(sp, sp + st.extent * st.inner, dp);
            }
            offset += st.extent;
        }
    });
    wire_backward(out, xs, [xs, so, axis](Node& self) {
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            std::int64_t offset = 0;
            for (const auto& t : xs) {
                const auto st = split_axis(t.shape(), axis);
                if (t.requires_grad()) {
                    t.node()->ensure_grad();
                    auto gx = t.node()->grad_buf<T>();
                    for (std::int64_t o = 0; o < st.outer; ++o) {
                        const T* sp = g.data() + (o * so.extent + offset) * so.inner;
                        T* dp = gx.data() + o * st.extent * st.inner;
                        for (std::int64_t i = 0; i < st.extent * st.inner; ++i) dp[i] += sp[i];
                    }
                }
                offset += st.extent;
            }
        });
    });
    return out;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
    if (x.ndim() < 2) throw std::invalid_argument("upsample_nearest: needs at least 2 axes");
    if (factor == 1) return reshape(x, x.shape()); // identity with grad passthrough
    const int nd = x.ndim();
    const std::int64_t H = x.shape()[static_cast<std::size_t>(nd - 2)];
    const std::int64_t W = x.shape()[static_cast<std::size_t>(nd - 1)];
    std::int64_t batch = 1;
    for (int i = 0; i < nd - 2; ++i) batch *= x.shape()[static_cast<std::size_t>(i)];
    auto out_shape = x.shape();
    out_shape[static_cast<std::size_t>(nd - 2)] = H * factor;
    out_shape[static_cast<std::size_t>(nd - 1)] = W * factor;
    Tensor out = make_result(out_shape, x.dtype());
    const std::int64_t OH = H * factor, OW = W * factor;
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        for (std::int64_t b = 0; b < batch; ++b) {
            const T* sp = src.data() + b * H * W;
            T* dp = dst.data() + b * OH * OW;
            for (std::int64_t oh = 0; oh < OH; ++oh) {
                const T* srow = sp + (oh / factor) * W;
                T* drow = dp + oh * OW;
                for (std::int64_t ow = 0; ow < OW; ++ow) drow[ow] = srow[ow / factor];
            }
        }
    });
    wire_backward(out, {x}, [x, batch, H, W, OH, OW, factor](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            for (std::int64_t b = 0; b < batch; ++b) {
                const T* gp = g.data() + b * OH * OW;
                T* gxp = gx.data() + b * H * W;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const T* grow = gp + oh * OW;
                    T* gxrow = gxp + (oh / factor) * W;
                    for (std::int64_t ow = 0; ow < OW; ++ow) gxrow[ow / factor] += grow[ow];
                }
            }
        });
    });
    return out;
}

Tensor avg_pool2d(const Tensor& x, int window) {
    if (window < 1) throw std::invalid_argument("avg_pool2d: window must be >= 1");
    if (x.ndim() < 2) throw std::invalid_argument("avg_pool2d: needs at least 2 axes");
    const int nd = x.ndim();
    const std::int64_t H = x.shape()[static_cast<std::size_t>(nd - 2)];
    const std::int64_t W = x.shape()[static_cast<std::size_t>(nd - 1)];
    if (H % window != 0 || W % window != 0)
        throw std::invalid_argument("avg_pool2d: extents not divisible by window");
    std::int64_t batch = 1;
    for (int i = 0; i < nd - 2; ++i) batch *= x.shape()[static_cast<std::size_t>(i)];
    const std::int64_t OH = H / window, OW = W / window;
    auto out_shape = x.shape();
    out_shape[static_cast<std::size_t>(nd - 2)] = OH;
    out_shape[static_cast<std::size_t>(nd - 1)] = OW;
    Tensor out = make_result(out_shape, x.dtype());
    const double inv = 1.0 / (static_cast<double>(window) * window);
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        for (std::int64_t b = 0; b < batch; ++b) {
            const T* sp = src.data() + b * H * W;
            T* dp = dst.data() + b * OH * OW;
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    double acc = 0.0;
                    for (int i = 0; i < window; ++i)
                        for (int j = 0; j < window; ++j)
                            acc += static_cast<double>(sp[(oh * window + i) * W + ow * window + j]);
                    dp[oh * OW + ow] = static_cast<T>(acc * inv);
                }
        }
    });
    wire_backward(out, {x}, [x, batch, H, W, OH, OW, window, inv](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            for (std::int64_t b = 0; b < batch; ++b) {
                const T* gp = g.data() + b * OH * OW;
                T* gxp = gx.data() + b * H * W;
                for (std::int64_t oh = 0; oh < OH; ++oh)
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        const T gv = static_cast<T>(static_cast<double>(gp[oh * OW + ow]) * inv);
                        for (int i = 0; i < window; ++i)
                            for (int j = 0; j < window; ++j)
                                gxp[(oh * window + i) * W + ow * window + j] += gv;
                    }
            }
        });
    });
    return out;
}

} // namespace refcolor
