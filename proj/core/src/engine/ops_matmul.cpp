#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::check_same_dtype(a, b, "matmul");
    const bool batched = a.ndim() == 3;
    if (!((a.ndim() == 2 && b.ndim() == 2) || (a.ndim() == 3 && b.ndim() == 3)))
        throw std::invalid_argument("matmul: expects 2-D x 2-D or 3-D x 3-D, got " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    const std::int64_t B = batched ? a.shape()[0] : 1;
    const std::int64_t M = a.shape()[batched ? 1 : 0];
    const std::int64_t K = a.shape()[batched ? 2 : 1];
    const std::int64_t Kb = b.shape()[batched ? 1 : 0];
    const std::int64_t N = b.shape()[batched ? 2 : 1];
    if (K != Kb || (batched && b.shape()[0] != B))
        throw std::invalid_argument("matmul: inner extents disagree " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));

    std::vector<std::int64_t> out_shape = batched ? std::vector<std::int64_t>{B, M, N}
                                                  : std::vector<std::int64_t>{M, N};
    Tensor out = make_result(out_shape, a.dtype());
    dispatch_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto av = a.data<T>();
        auto bv = b.data<T>();
        auto ov = out.data<T>();
        for (std::int64_t i = 0; i < B; ++i)
            detail::gemm<T>(M, N, K, av.data() + i * M * K, bv.data() + i * K * N, ov.data() + i * M * N,
                            false);
    });
    wire_backward(out, {a, b}, [a, b, B, M, N, K](Node& self) {
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            if (a.requires_grad()) {
                a.node()->ensure_grad();
                auto ga = a.node()->grad_buf<T>();
                auto bv = b.data<T>();
                // dA = dC * B^T
                for (std::int64_t i = 0; i < B; ++i)
                    detail::gemm_nt<T>(M, K, N, g.data() + i * M * N, bv.data() + i * K * N,
                                       ga.data() + i * M * K, true);
            }
            if (b.requires_grad()) {
                b.node()->ensure_grad();
                auto gb = b.node()->grad_buf<T>();
                auto av = a.data<T>();
                // dB = A^T * dC
                for (std::int64_t i = 0; i < B; ++i)
                    detail::gemm_tn<T>(K, N, M, av.data() + i * M * K, g.data() + i * M * N,
                                       gb.data() + i * K * N, true);
            }
        });
    });
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.ndim()) throw std::invalid_argument("softmax: axis out of range");
    std::int64_t outer = 1, inner = 1;
    const std::int64_t extent = x.shape()[static_cast<std::size_t>(axis)];
    for (int i = 0; i < axis; ++i) outer *= x.shape()[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.shape()[static_cast<std::size_t>(i)];

    Tensor out = make_result(x.shape(), x.dtype());
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto src = x.data<T>();
        auto dst = out.data<T>();
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t in = 0; in < inner; ++in) {
                const T* sp = src.data() + o * extent * inner + in;
                T* dp = dst.data() + o * extent * inner + in;
                T mx = sp[0];
                for (std::int64_t k = 1; k < extent; ++k) mx = std::max(mx, sp[k * inner]);
                double denom = 0.0;
                for (std::int64_t k = 0; k < extent; ++k) {
                    const double e = std::exp(static_cast<double>(sp[k * inner] - mx));
                    dp[k * inner] = static_cast<T>(e);
                    denom += e;
                }
                const double inv = 1.0 / denom;
                for (std::int64_t k = 0; k < extent; ++k)
                    dp[k * inner] = static_cast<T>(static_cast<double>(dp[k * inner]) * inv);
            }
        }
    });
    wire_backward(out, {x}, [x, outer, inner, extent](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            auto y = self.buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            for (std::int64_t o = 0; o < outer; ++o) {
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t base = o * extent * inner + in;
                    double dot = 0.0;
                    for (std::int64_t k = 0; k < extent; ++k)
                        dot += static_cast<double>(g[base + k * inner]) * static_cast<double>(y[base + k * inner]);
                    for (std::int64_t k = 0; k < extent; ++k) {
                        const double yi = static_cast<double>(y[base + k * inner]);
                        gx[base + k * inner] +=
                            static_cast<T>(yi * (static_cast<double>(g[base + k * inner]) - dot));
                    }
                }
            }
        });
    });
    return out;
}

} // namespace refcolor
