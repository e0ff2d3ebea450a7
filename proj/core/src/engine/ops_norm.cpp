#include <cmath>
#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

Tensor instance_norm(const Tensor& x, double eps) {
    if (x.ndim() != 4) throw std::invalid_argument("instance_norm: expects [N,C,H,W], got " + shape_str(x.shape()));
    if (eps <= 0.0) throw std::invalid_argument("instance_norm: eps must be positive");
    const std::int64_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const std::int64_t M = H * W;

    Tensor out = make_result(x.shape(), x.dtype());
    // Per-(n,c) inverse stddev, saved for backward.
    auto istd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N * C));
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xv = x.data<T>();
        auto ov = out.data<T>();
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
            const T* xp = xv.data() + nc * M;
            T* op = ov.data() + nc * M;
            double mean = 0.0;
            for (std::int64_t i = 0; i < M; ++i) mean += static_cast<double>(xp[i]);
            mean /= static_cast<double>(M);
            double var = 0.0;
            for (std::int64_t i = 0; i < M; ++i) {
                const double d = static_cast<double>(xp[i]) - mean;
                var += d * d;
            }
            var /= static_cast<double>(M);
            const double is = 1.0 / std::sqrt(var + eps);
            (*istd)[static_cast<std::size_t>(nc)] = is;
            for (std::int64_t i = 0; i < M; ++i)
                op[i] = static_cast<T>((static_cast<double>(xp[i]) - mean) * is);
        }
    });
    wire_backward(out, {x}, [x, istd, N, C, M](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            auto y = self.buf<T>(); // normalized values
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            for (std::int64_t nc = 0; nc < N * C; ++nc) {
                const T* gp = g.data() + nc * M;
                const T* yp = y.data() + nc * M;
                T* gxp = gx.data() + nc * M;
                double gmean = 0.0, gymean = 0.0;
                for (std::int64_t i = 0; i < M; ++i) {
                    gmean += static_cast<double>(gp[i]);
                    gymean += static_cast<double>(gp[i]) * static_cast<double>(yp[i]);
                }
                gmean /= static_cast<double>(M);
                gymean /= static_cast<double>(M);
                const double is = (*istd)[static_cast<std::size_t>(nc)];
                for (std::int64_t i = 0; i < M; ++i)
                    gxp[i] += static_cast<T>(is * (static_cast<double>(gp[i]) - gmean -
                                                   static_cast<double>(yp[i]) * gymean));
            }
        });
    });
    return out;
}

Tensor adain(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.ndim() != 4) throw std::invalid_argument("adain: expects [N,C,H,W], got " + shape_str(x.shape()));
    const std::int64_t N = x.shape()[0], C = x.shape()[1];
    auto check_affine = [&](const Tensor& t, const char* name) -> Tensor {
        if (t.ndim() == 1 && t.shape()[0] == C) return reshape(t, {1, C, 1, 1});
        if (t.ndim() == 2 && t.shape()[0] == N && t.shape()[1] == C) return reshape(t, {N, C, 1, 1});
        throw std::invalid_argument(std::string("adain: ") + name + " must be [C] or [N,C], got " +
                                    shape_str(t.shape()));
    };
    Tensor g4 = check_affine(gamma, "gamma");
    Tensor b4 = check_affine(beta, "beta");
    return add(mul(instance_norm(x, eps), g4), b4);
}

} // namespace refcolor
