#include <algorithm>
#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

namespace {

Tensor reduce_axes(const Tensor& x, std::vector<int> axes, bool keepdim, bool mean) {
    const int nd = x.ndim();
    std::vector<bool> reduced(static_cast<std::size_t>(nd), false);
    for (int a : axes) {
        if (a < 0 || a >= nd) throw std::invalid_argument("reduce: axis out of range");
        if (reduced[static_cast<std::size_t>(a)]) throw std::invalid_argument("reduce: duplicate axis");
        reduced[static_cast<std::size_t>(a)] = true;
    }
    std::vector<std::int64_t> out_shape;
    std::int64_t count = 1;
    for (int i = 0; i < nd; ++i) {
        if (reduced[static_cast<std::size_t>(i)]) {
            count *= x.shape()[static_cast<std::size_t>(i)];
            if (keepdim) out_shape.push_back(1);
        } else {
            out_shape.push_back(x.shape()[static_cast<std::size_t>(i)]);
        }
    }
    if (out_shape.empty()) out_shape.push_back(1);

    // Map each input flat position to the output flat position.
    const auto in_strides = detail::strides_of(x.shape());
    std::vector<std::int64_t> out_strides_for_in(static_cast<std::size_t>(nd), 0);
    {
        std::vector<std::int64_t> kept_shape;
        for (int i = 0; i < nd; ++i)
            if (!reduced[static_cast<std::size_t>(i)]) kept_shape.push_back(x.shape()[static_cast<std::size_t>(i)]);
        if (kept_shape.empty()) kept_shape.push_back(1);
        auto kept_strides = detail::strides_of(kept_shape);
        std::size_t k = 0;
        for (int i = 0; i < nd; ++i)
            if (!reduced[static_cast<std::size_t>(i)]) out_strides_for_in[static_cast<std::size_t>(i)] = kept_strides[k++];
    }

    Tensor out = make_result(out_shape, x.dtype());
    const double scale = mean ? 1.0 / static_cast<double>(count) : 1.0;
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
        std::int64_t oi = 0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[oi] += src[i];
            for (int d = nd - 1; d >= 0; --d) {
                ++idx[static_cast<std::size_t>(d)];
                oi += out_strides_for_in[static_cast<std::size_t>(d)];
                if (idx[static_cast<std::size_t>(d)] < x.shape()[static_cast<std::size_t>(d)]) break;
                idx[static_cast<std::size_t>(d)] = 0;
                oi -= out_strides_for_in[static_cast<std::size_t>(d)] * x.shape()[static_cast<std::size_t>(d)];
            }
        }
        if (mean)
            for (auto& v : dst) v = static_cast<T>(v * scale);
    });
    auto xshape = x.shape();
    wire_backward(out, {x}, [x, out_strides_for_in, xshape, nd, scale](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            std::vector<std::int64_t> idx(static_cast<std::size_t>(nd), 0);
            std::int64_t oi = 0;
            const T s = static_cast<T>(scale);
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] += g[oi] * s;
                for (int d = nd - 1; d >= 0; --d) {
                    ++idx[static_cast<std::size_t>(d)];
                    oi += out_strides_for_in[static_cast<std::size_t>(d)];
                    if (idx[static_cast<std::size_t>(d)] < xshape[static_cast<std::size_t>(d)]) break;
                    idx[static_cast<std::size_t>(d)] = 0;
                    oi -= out_strides_for_in[static_cast<std::size_t>(d)] * xshape[static_cast<std::size_t>(d)];
                }
            }
        });
    });
    return out;
}

} // namespace

Tensor sum_all(const Tensor& x) {
    std::vector<int> axes(static_cast<std::size_t>(x.ndim()));
    for (int i = 0; i < x.ndim(); ++i) axes[static_cast<std::size_t>(i)] = i;
    return reduce_axes(x, axes, false, false);
}

Tensor mean_all(const Tensor& x) {
    std::vector<int> axes(static_cast<std::size_t>(x.ndim()));
    for (int i = 0; i < x.ndim(); ++i) axes[static_cast<std::size_t>(i)] = i;
    return reduce_axes(x, axes, false, true);
}

Tensor mean_axes(const Tensor& x, std::vector<int> axes, bool keepdim) {
    return reduce_axes(x, std::move(axes), keepdim, true);
}

Tensor sum_axes(const Tensor& x, std::vector<int> axes, bool keepdim) {
    return reduce_axes(x, std::move(axes), keepdim, false);
}

} // namespace refcolor
