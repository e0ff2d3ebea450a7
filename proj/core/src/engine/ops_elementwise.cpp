#include <cmath>
#include <functional>
#include <stdexcept>

#include "op_common.hpp"
#include "refcolor/engine/ops.hpp"

namespace refcolor {

using detail::make_result;
using detail::Node;
using detail::wire_backward;

namespace {

// Binary elementwise with limited broadcasting: equal rank, each axis extent
// of either operand must equal the output extent or 1.
struct BroadcastPlan {
    std::vector<std::int64_t> out_shape;
    std::vector<std::int64_t> out_strides;
    std::vector<std::int64_t> a_strides, b_strides; // 0 marks a broadcast axis
    bool trivial;                                   // identical shapes
};

BroadcastPlan plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
    if (a.ndim() != b.ndim())
        throw std::invalid_argument(std::string(op) + ": rank mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    BroadcastPlan p;
    p.trivial = a.shape() == b.shape();
    p.out_shape.resize(a.shape().size());
    for (std::size_t i = 0; i < p.out_shape.size(); ++i) {
        const auto da = a.shape()[i], db = b.shape()[i];
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                                        " vs " + shape_str(b.shape()));
        p.out_shape[i] = std::max(da, db);
    }
    p.out_strides = detail::strides_of(p.out_shape);
    auto sa = detail::strides_of(a.shape());
    auto sb = detail::strides_of(b.shape());
    p.a_strides.resize(sa.size());
    p.b_strides.resize(sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        p.a_strides[i] = (a.shape()[i] == 1 && p.out_shape[i] != 1) ? 0 : sa[i];
        p.b_strides[i] = (b.shape()[i] == 1 && p.out_shape[i] != 1) ? 0 : sb[i];
    }
    return p;
}

// out[o] = f(x[xi(o)], y[yi(o)]) iterating in out order with the given strides.
template <class T, class F>
void strided_zip(const std::vector<std::int64_t>& out_shape, const std::vector<std::int64_t>& xs,
                 const std::vector<std::int64_t>& ys, std::span<const T> x, std::span<const T> y,
                 std::span<T> out, F&& f) {
    const int nd = static_cast<int>(out_shape.size());
    std::vector<std::int64_t> idx(nd, 0);
    std::int64_t xi = 0, yi = 0;
    for (std::size_t o = 0; o < out.size(); ++o) {
        out[o] = f(x[xi], y[yi]);
        for (int d = nd - 1; d >= 0; --d) {
            ++idx[d];
            xi += xs[d];
            yi += ys[d];
            if (idx[d] < out_shape[d]) break;
            idx[d] = 0;
            xi -= xs[d] * out_shape[d];
            yi -= ys[d] * out_shape[d];
        }
    }
}

// gop[oi(o)] += gsrc[o]: folds an out-shaped gradient into a (possibly
// broadcast) operand following its strides.
template <class T>
void fold_grad(const std::vector<std::int64_t>& out_shape, const std::vector<std::int64_t>& strides,
               std::span<const T> gsrc, std::span<T> gop) {
    const int nd = static_cast<int>(out_shape.size());
    std::vector<std::int64_t> idx(nd, 0);
    std::int64_t oi = 0;
    for (std::size_t o = 0; o < gsrc.size(); ++o) {
        gop[oi] += gsrc[o];
        for (int d = nd - 1; d >= 0; --d) {
            ++idx[d];
            oi += strides[d];
            if (idx[d] < out_shape[d]) break;
            idx[d] = 0;
            oi -= strides[d] * out_shape[d];
        }
    }
}

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind, const char* name) {
    detail::check_same_dtype(a, b, name);
    auto plan = plan_broadcast(a, b, name);
    Tensor out = make_result(plan.out_shape, a.dtype());
    dispatch_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto av = a.data<T>();
        auto bv = b.data<T>();
        auto ov = out.data<T>();
        if (plan.trivial) {
            switch (kind) {
            case BinKind::Add:
                for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
                break;
            case BinKind::Sub:
                for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
                break;
            case BinKind::Mul:
                for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
                break;
            }
        } else {
            switch (kind) {
            case BinKind::Add:
                strided_zip<T>(plan.out_shape, plan.a_strides, plan.b_strides, av, bv, ov,
                               [](T x, T y) { return x + y; });
                break;
            case BinKind::Sub:
                strided_zip<T>(plan.out_shape, plan.a_strides, plan.b_strides, av, bv, ov,
                               [](T x, T y) { return x - y; });
                break;
            case BinKind::Mul:
                strided_zip<T>(plan.out_shape, plan.a_strides, plan.b_strides, av, bv, ov,
                               [](T x, T y) { return x * y; });
                break;
            }
        }
    });
    wire_backward(out, {a, b}, [a, b, plan, kind](Node& self) {
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            std::vector<T> tmp;

            auto accum = [&](const Tensor& t, const std::vector<std::int64_t>& strides,
                             std::span<const T> grad_wrt_t) {
                t.node()->ensure_grad();
                auto gop = t.node()->grad_buf<T>();
                if (plan.trivial) {
                    for (std::size_t i = 0; i < gop.size(); ++i) gop[i] += grad_wrt_t[i];
                } else {
                    fold_grad<T>(plan.out_shape, strides, grad_wrt_t, gop);
                }
            };

            switch (kind) {
            case BinKind::Add:
                if (a.requires_grad()) accum(a, plan.a_strides, g);
                if (b.requires_grad()) accum(b, plan.b_strides, g);
                break;
            case BinKind::Sub:
                if (a.requires_grad()) accum(a, plan.a_strides, g);
                if (b.requires_grad()) {
                    tmp.assign(g.begin(), g.end());
                    for (auto& v : tmp) v = -v;
                    accum(b, plan.b_strides, std::span<const T>(tmp));
                }
                break;
            case BinKind::Mul:
                if (a.requires_grad()) {
                    tmp.resize(g.size());
                    std::span<T> tspan(tmp);
                    strided_zip<T>(plan.out_shape, plan.out_strides, plan.b_strides, g, b.data<T>(), tspan,
                                   [](T x, T y) { return x * y; });
                    accum(a, plan.a_strides, std::span<const T>(tmp));
                }
                if (b.requires_grad()) {
                    tmp.resize(g.size());
                    std::span<T> tspan(tmp);
                    strided_zip<T>(plan.out_shape, plan.out_strides, plan.a_strides, g, a.data<T>(), tspan,
                                   [](T x, T y) { return x * y; });
                    accum(b, plan.b_strides, std::span<const T>(tmp));
                }
                break;
            }
        });
    });
    return out;
}

template <class FwdF, class DerivF>
Tensor unary_pointwise(const Tensor& x, FwdF&& fwd, DerivF&& dfdx) {
    Tensor out = make_result(x.shape(), x.dtype());
    dispatch_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto xv = x.data<T>();
        auto ov = out.data<T>();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = static_cast<T>(fwd(static_cast<double>(xv[i])));
    });
    wire_backward(out, {x}, [x, dfdx](Node& self) {
        if (!x.requires_grad()) return;
        dispatch_dtype(self.dtype, [&](auto tag) {
            using T = decltype(tag);
            auto g = self.grad_buf<T>();
            x.node()->ensure_grad();
            auto gx = x.node()->grad_buf<T>();
            auto xv = x.data<T>();
            for (std::size_t i = 0; i < gx.size(); ++i)
                gx[i] += g[i] * static_cast<T>(dfdx(static_cast<double>(xv[i])));
        });
    });
    return out;
}

double stable_sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul, "mul"); }

Tensor affine(const Tensor& x, double scale, double shift) {
    return unary_pointwise(
        x, [=](double v) { return scale * v + shift; }, [scale](double) { return scale; });
}

Tensor neg(const Tensor& x) { return affine(x, -1.0, 0.0); }

Tensor relu(const Tensor& x) {
    return unary_pointwise(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
    return unary_pointwise(
        x, [=](double v) { return v > 0.0 ? v : negative_slope * v; },
        [=](double v) { return v > 0.0 ? 1.0 : negative_slope; });
}

Tensor sigmoid(const Tensor& x) {
    return unary_pointwise(
        x, [](double v) { return stable_sigmoid(v); },
        [](double v) {
            const double s = stable_sigmoid(v);
            return s * (1.0 - s);
        });
}

Tensor tanh_op(const Tensor& x) {
    return unary_pointwise(
        x, [](double v) { return std::tanh(v); },
        [](double v) {
            const double t = std::tanh(v);
            return 1.0 - t * t;
        });
}

Tensor softplus(const Tensor& x) {
    return unary_pointwise(
        x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
        [](double v) { return stable_sigmoid(v); });
}

Tensor abs_op(const Tensor& x) {
    return unary_pointwise(
        x, [](double v) { return std::abs(v); },
        [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
    return unary_pointwise(
        x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

} // namespace refcolor
