#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "refcolor/engine/gradcheck.hpp"
#include "refcolor/engine/ops.hpp"
#include "refcolor/engine/param.hpp"
#include "testutil.hpp"

using namespace refcolor;
using testutil::rand_t;

namespace {

// Weighted-sum head turns any tensor into a scalar with nonuniform weights,
// so the gradient seen by the checked op is not a constant field.
Tensor probe(const Tensor& t, Rng& rng) {
    Tensor w = rand_t(t.shape(), rng, DType::F64, -1.0, 1.0);
    return sum_all(mul(t, w));
}

double check1(const std::function<Tensor(const Tensor&)>& f, Tensor x, const char* name) {
    auto res = gradcheck([&]() { return f(x); }, {{name, x}});
    INFO(name, " worst=", res.worst_leaf, " idx=", res.worst_index);
    CHECK(res.max_rel_err < 1e-4);
    return res.max_rel_err;
}

} // namespace

TEST_CASE("grad: elementwise binary with broadcasting") {
    Rng rng(101);
    Tensor a = rand_t({2, 3, 4}, rng, DType::F64, -1.5, 1.5, true);
    Tensor b = rand_t({2, 1, 4}, rng, DType::F64, -1.5, 1.5, true);
    Rng pr(7);
    Tensor pw = rand_t({2, 3, 4}, pr);
    for (auto f : {add, sub, mul}) {
        auto res = gradcheck([&]() { return sum_all(mul(f(a, b), pw)); }, {{"a", a}, {"b", b}});
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: unary pointwise ops away from kinks") {
    Rng rng(102);
    // Values bounded away from 0 so relu/abs kinks are not straddled by h.
    Tensor pos = rand_t({3, 5}, rng, DType::F64, 0.2, 1.5, true);
    Tensor neg = rand_t({3, 5}, rng, DType::F64, -1.5, -0.2, true);
    Rng pr(8);
    for (Tensor x : {pos, neg}) {
        for (auto f : {relu, sigmoid, tanh_op, softplus, abs_op, square}) {
            auto res = gradcheck([&]() { Rng lr(9); return probe(f(x), lr); }, {{"x", x}});
            CHECK(res.max_rel_err < 1e-4);
        }
        auto res = gradcheck([&]() { Rng lr(9); return probe(leaky_relu(x, 0.2), lr); }, {{"x", x}});
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: affine") {
    Rng rng(103);
    Tensor x = rand_t({4, 4}, rng, DType::F64, -1.0, 1.0, true);
    check1([](const Tensor& t) { Rng lr(10); return probe(affine(t, 0.5, 0.25), lr); }, x, "x");
}

TEST_CASE("grad: matmul 2d and batched") {
    Rng rng(104);
    Tensor a = rand_t({4, 5}, rng, DType::F64, -1.0, 1.0, true);
    Tensor b = rand_t({5, 3}, rng, DType::F64, -1.0, 1.0, true);
    auto res = gradcheck([&]() { Rng lr(11); return probe(matmul(a, b), lr); }, {{"a", a}, {"b", b}});
    CHECK(res.max_rel_err < 1e-4);

    Tensor ab = rand_t({2, 3, 4}, rng, DType::F64, -1.0, 1.0, true);
    Tensor bb = rand_t({2, 4, 2}, rng, DType::F64, -1.0, 1.0, true);
    auto res2 = gradcheck([&]() { Rng lr(12); return probe(matmul(ab, bb), lr); }, {{"a", ab}, {"b", bb}});
    CHECK(res2.max_rel_err < 1e-4);
}

TEST_CASE("grad: softmax") {
    Rng rng(105);
    Tensor x = rand_t({3, 6}, rng, DType::F64, -2.0, 2.0, true);
    check1([](const Tensor& t) { Rng lr(13); return probe(softmax(t, 1), lr); }, x, "x");
    check1([](const Tensor& t) { Rng lr(14); return probe(softmax(t, 0), lr); }, x, "x");
}

TEST_CASE("grad: conv2d input, kernel, bias") {
    Rng rng(106);
    Tensor x = rand_t({2, 3, 6, 6}, rng, DType::F64, -1.0, 1.0, true);
    Tensor w = rand_t({4, 3, 3, 3}, rng, DType::F64, -0.5, 0.5, true);
    Tensor b = rand_t({4}, rng, DType::F64, -0.5, 0.5, true);
    for (auto [stride, pad, dil] : {std::tuple{1, 1, 1}, {2, 1, 1}, {1, 2, 2}}) {
        Conv2dOpts o;
        o.stride = stride;
        o.padding = pad;
        o.dilation = dil;
        auto res = gradcheck([&]() { Rng lr(15); return probe(conv2d(x, w, b, o), lr); },
                             {{"x", x}, {"w", w}, {"b", b}});
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("grad: conv2d circular padding") {
    Rng rng(107);
    Tensor x = rand_t({1, 2, 6, 6}, rng, DType::F64, -1.0, 1.0, true);
    Tensor w = rand_t({2, 2, 3, 3}, rng, DType::F64, -0.5, 0.5, true);
    Conv2dOpts o;
    o.stride = 2;
    o.padding = 1;
    o.pad_mode = PadMode::Circular;
    auto res = gradcheck([&]() { Rng lr(16); return probe(conv2d(x, w, std::nullopt, o), lr); },
                         {{"x", x}, {"w", w}});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("grad: conv3d") {
    Rng rng(108);
    Tensor x = rand_t({1, 2, 4, 5, 5}, rng, DType::F64, -1.0, 1.0, true);
    Tensor w = rand_t({3, 2, 3, 3, 3}, rng, DType::F64, -0.5, 0.5, true);
    Tensor b = rand_t({3}, rng, DType::F64, -0.2, 0.2, true);
    Conv3dOpts o;
    o.pad_t = 1;
    o.pad_h = 1;
    o.pad_w = 1;
    o.stride_h = 2;
    o.stride_w = 2;
    auto res = gradcheck([&]() { Rng lr(17); return probe(conv3d(x, w, b, o), lr); },
                         {{"x", x}, {"w", w}, {"b", b}});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("grad: instance_norm and adain") {
    Rng rng(109);
    Tensor x = rand_t({2, 3, 4, 4}, rng, DType::F64, -1.0, 2.0, true);
    check1([](const Tensor& t) { Rng lr(18); return probe(instance_norm(t, 1e-5), lr); }, x, "x");

    Tensor gamma = rand_t({2, 3}, rng, DType::F64, 0.5, 1.5, true);
    Tensor beta = rand_t({2, 3}, rng, DType::F64, -0.5, 0.5, true);
    auto res = gradcheck([&]() { Rng lr(19); return probe(adain(x, gamma, beta), lr); },
                         {{"x", x}, {"gamma", gamma}, {"beta", beta}});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("grad: reductions") {
    Rng rng(110);
    Tensor x = rand_t({2, 3, 4}, rng, DType::F64, -1.0, 1.0, true);
    check1([](const Tensor& t) { return sum_all(square(t)); }, x, "x");
    check1([](const Tensor& t) { Rng lr(20); return probe(mean_axes(t, {1}), lr); }, x, "x");
    check1([](const Tensor& t) { Rng lr(21); return probe(sum_axes(t, {0, 2}), lr); }, x, "x");
    check1([](const Tensor& t) { Rng lr(22); return probe(mean_axes(t, {0, 1, 2}, true), lr); }, x, "x");
}

TEST_CASE("grad: shape ops") {
    Rng rng(111);
    Tensor x = rand_t({2, 3, 4}, rng, DType::F64, -1.0, 1.0, true);
    check1([](const Tensor& t) { Rng lr(23); return probe(reshape(t, {4, 6}), lr); }, x, "x");
    check1([](const Tensor& t) { Rng lr(24); return probe(permute(t, {2, 0, 1}), lr); }, x, "x");
    check1([](const Tensor& t) { Rng lr(25); return probe(slice(t, 1, 1, 2), lr); }, x, "x");

    Tensor y = rand_t({2, 2, 4}, rng, DType::F64, -1.0, 1.0, true);
    auto res = gradcheck([&]() { Rng lr(26); return probe(concat({x, y}, 1), lr); }, {{"x", x}, {"y", y}});
    CHECK(res.max_rel_err < 1e-4);

    Tensor im = rand_t({1, 2, 3, 3}, rng, DType::F64, -1.0, 1.0, true);
    check1([](const Tensor& t) { Rng lr(27); return probe(upsample_nearest(t, 2), lr); }, im, "im");
}

TEST_CASE("grad: spectral_normalize with frozen state") {
    ParamStore store;
    Rng rng(112);
    Parameter& p = store.add("w", Tensor::randn({4, 6}, rng, DType::F64, 1.0), true, &rng);
    // Warm up the power-iteration state, then check with it frozen.
    { spectral_normalize(p, 30); }
    auto res = gradcheck([&]() { Rng lr(28); return probe(spectral_normalize(p, 1), lr); },
                         {{"w", p.tensor}});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("gradcheck harness detects a wrong backward") {
    using detail::Node;
    Rng rng(113);
    Tensor x = rand_t({3}, rng, DType::F64, 0.5, 1.5, true);
    // An op computing x^2 but claiming d/dx = 3x.
    auto bad_square = [](const Tensor& in) {
        Tensor out = detail::make_result(in.shape(), in.dtype());
        auto iv = in.data<double>();
        auto ov = out.data<double>();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = iv[i] * iv[i];
        detail::wire_backward(out, {in}, [in](Node& self) {
            auto g = self.grad_buf<double>();
            in.node()->ensure_grad();
            auto gx = in.node()->grad_buf<double>();
            auto iv = in.data<double>();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * 3.0 * iv[i];
        });
        return out;
    };
    auto res = gradcheck([&]() { return sum_all(bad_square(x)); }, {{"x", x}});
    CHECK(res.max_rel_err > 1e-2);
}

TEST_CASE("grad: composite chain through many ops") {
    Rng rng(114);
    Tensor x = rand_t({1, 4, 8, 8}, rng, DType::F64, -1.0, 1.0, true);
    Tensor w = rand_t({4, 4, 3, 3}, rng, DType::F64, -0.3, 0.3, true);
    auto forward = [&]() {
        Conv2dOpts o;
        o.padding = 1;
        Tensor h = conv2d(x, w, std::nullopt, o);
        h = instance_norm(h);
        h = tanh_op(h);
        h = upsample_nearest(h, 2);
        h = mean_axes(h, {2, 3});
        Tensor s = softmax(h, 1);
        return sum_all(square(s));
    };
    auto res = gradcheck(forward, {{"x", x}, {"w", w}});
    CHECK(res.max_rel_err < 1e-4);
}
