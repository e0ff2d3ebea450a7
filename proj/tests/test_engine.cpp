#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "refcolor/engine/gradcheck.hpp"
#include "refcolor/engine/ops.hpp"
#include "refcolor/engine/optim.hpp"
#include "refcolor/engine/param.hpp"
#include "testutil.hpp"

using namespace refcolor;
using testutil::max_abs_diff;
using testutil::rand_t;

TEST_CASE("matmul identity and annihilator") {
    Rng rng(1);
    Tensor a = rand_t({3, 3}, rng);
    std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Tensor i3 = Tensor::from_data({3, 3}, std::span<const double>(eye), DType::F64);
    CHECK(max_abs_diff(matmul(i3, a), a) == 0.0);

    Tensor z = Tensor::zeros({3, 4}, DType::F64);
    Tensor az = matmul(a, z);
    for (double v : az.to_vector()) CHECK(v == 0.0);
}

TEST_CASE("matmul equals triple-loop oracle") {
    Rng rng(2);
    Tensor a = rand_t({4, 5}, rng);
    Tensor b = rand_t({5, 3}, rng);
    auto oracle = testutil::matmul_oracle(a.to_vector(), b.to_vector(), 4, 5, 3);
    CHECK(max_abs_diff(matmul(a, b), oracle) < 1e-12);
}

TEST_CASE("matmul batched matches per-slice oracle") {
    Rng rng(3);
    Tensor a = rand_t({2, 3, 4}, rng);
    Tensor b = rand_t({2, 4, 5}, rng);
    Tensor c = matmul(a, b);
    auto av = a.to_vector();
    auto bv = b.to_vector();
    auto cv = c.to_vector();
    for (int s = 0; s < 2; ++s) {
        std::vector<double> as(av.begin() + s * 12, av.begin() + (s + 1) * 12);
        std::vector<double> bs(bv.begin() + s * 20, bv.begin() + (s + 1) * 20);
        auto cs = testutil::matmul_oracle(as, bs, 3, 4, 5);
        for (int i = 0; i < 15; ++i) CHECK(std::abs(cv[s * 15 + i] - cs[i]) < 1e-12);
    }
}

TEST_CASE("matmul rejects shape mismatch") {
    Rng rng(4);
    Tensor a = rand_t({2, 3}, rng);
    Tensor b = rand_t({4, 2}, rng);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("softmax symmetry, shift invariance, oracle") {
    std::vector<double> z = {0, 0, 0};
    Tensor t = Tensor::from_data({3}, std::span<const double>(z), DType::F64);
    auto s = softmax(t, 0).to_vector();
    for (double v : s) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Rng rng(5);
    Tensor x = rand_t({7}, rng, DType::F64, -3.0, 3.0);
    Tensor shifted = affine(x, 1.0, 4.2);
    CHECK(max_abs_diff(softmax(x, 0), softmax(shifted, 0)) < 1e-12);

    std::vector<double> v123 = {1, 2, 3};
    Tensor t123 = Tensor::from_data({3}, std::span<const double>(v123), DType::F64);
    CHECK(max_abs_diff(softmax(t123, 0), testutil::softmax_oracle(v123)) < 1e-12);
}

TEST_CASE("softmax sums to one along axis") {
    Rng rng(6);
    Tensor x = rand_t({3, 5, 4}, rng, DType::F64, -10.0, 10.0);
    for (int axis = 0; axis < 3; ++axis) {
        Tensor s = softmax(x, axis);
        Tensor sums = sum_axes(s, {axis});
        for (double v : sums.to_vector()) CHECK(std::abs(v - 1.0) < 1e-6);
    }
}

TEST_CASE("conv2d identity kernel") {
    Rng rng(7);
    Tensor x = rand_t({1, 1, 5, 5}, rng);
    std::vector<double> one = {1.0};
    Tensor k = Tensor::from_data({1, 1, 1, 1}, std::span<const double>(one), DType::F64);
    CHECK(max_abs_diff(conv2d(x, k, std::nullopt, {}), x) == 0.0);
}

TEST_CASE("conv2d all-ones kernel on constant input") {
    Tensor x = Tensor::full({1, 1, 6, 6}, 0.7, DType::F64);
    Tensor k = Tensor::full({1, 1, 3, 3}, 1.0, DType::F64);
    Conv2dOpts o;
    o.padding = 1;
    Tensor y = conv2d(x, k, std::nullopt, o);
    // Interior positions see the full 3x3 window.
    auto yv = y.to_vector();
    for (int i = 1; i < 5; ++i)
        for (int j = 1; j < 5; ++j) CHECK(yv[i * 6 + j] == doctest::Approx(9 * 0.7).epsilon(1e-12));
}

TEST_CASE("conv2d equals nested-loop oracle") {
    Rng rng(8);
    Tensor x = rand_t({1, 2, 5, 5}, rng);
    Tensor w = rand_t({3, 2, 3, 3}, rng);
    for (auto [stride, pad, dil] : {std::tuple{1, 0, 1}, {1, 1, 1}, {2, 1, 1}, {1, 2, 2}}) {
        Conv2dOpts o;
        o.stride = stride;
        o.padding = pad;
        o.dilation = dil;
        Tensor y = conv2d(x, w, std::nullopt, o);
        auto oracle = testutil::conv2d_oracle(x.to_vector(), w.to_vector(), 1, 2, 5, 5, 3, 3, 3, stride, pad, dil);
        CHECK(max_abs_diff(y, oracle) < 1e-10);
    }
}

TEST_CASE("conv2d rejects non-positive output extent") {
    Rng rng(9);
    Tensor x = rand_t({1, 1, 2, 2}, rng);
    Tensor w = rand_t({1, 1, 5, 5}, rng);
    CHECK_THROWS_AS(conv2d(x, w, std::nullopt, {}), std::invalid_argument);
}

TEST_CASE("conv3d equals nested-loop oracle") {
    Rng rng(10);
    Tensor x = rand_t({1, 2, 4, 5, 5}, rng);
    Tensor w = rand_t({3, 2, 3, 3, 3}, rng);
    Conv3dOpts o;
    o.pad_t = 1;
    o.pad_h = 1;
    o.pad_w = 1;
    o.stride_h = 2;
    o.stride_w = 2;
    Tensor y = conv3d(x, w, std::nullopt, o);
    // Direct 7-loop oracle.
    auto xv = x.to_vector();
    auto wv = w.to_vector();
    const std::int64_t C = 2, T = 4, H = 5, W = 5, F = 3;
    const std::int64_t OT = T, OH = (H + 2 - 3) / 2 + 1, OW = OH;
    auto yv = y.to_vector();
    REQUIRE(y.shape() == std::vector<std::int64_t>{1, F, OT, OH, OW});
    for (std::int64_t f = 0; f < F; ++f)
        for (std::int64_t ot = 0; ot < OT; ++ot)
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    double acc = 0.0;
                    for (std::int64_t c = 0; c < C; ++c)
                        for (int a = 0; a < 3; ++a)
                            for (int b = 0; b < 3; ++b)
                                for (int d = 0; d < 3; ++d) {
                                    const std::int64_t it = ot - 1 + a, ih = oh * 2 - 1 + b, iw = ow * 2 - 1 + d;
                                    if (it < 0 || it >= T || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                    acc += xv[((c * T + it) * H + ih) * W + iw] *
                                           wv[(((f * C + c) * 3 + a) * 3 + b) * 3 + d];
                                }
                    CHECK(std::abs(yv[((f * OT + ot) * OH + oh) * OW + ow] - acc) < 1e-10);
                }
}

TEST_CASE("instance_norm moments and oracle") {
    Rng rng(11);
    Tensor x = rand_t({2, 3, 4, 4}, rng, DType::F64, -2.0, 5.0);
    Tensor y = instance_norm(x, 1e-5);
    auto yv = y.to_vector();
    auto xv = x.to_vector();
    for (int nc = 0; nc < 6; ++nc) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < 16; ++i) mean += yv[nc * 16 + i];
        mean /= 16;
        for (int i = 0; i < 16; ++i) var += (yv[nc * 16 + i] - mean) * (yv[nc * 16 + i] - mean);
        var /= 16;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
        // Direct formula oracle.
        double xm = 0.0, xv2 = 0.0;
        for (int i = 0; i < 16; ++i) xm += xv[nc * 16 + i];
        xm /= 16;
        for (int i = 0; i < 16; ++i) xv2 += (xv[nc * 16 + i] - xm) * (xv[nc * 16 + i] - xm);
        xv2 /= 16;
        for (int i = 0; i < 16; ++i) {
            const double expect = (xv[nc * 16 + i] - xm) / std::sqrt(xv2 + 1e-5);
            CHECK(std::abs(yv[nc * 16 + i] - expect) < 1e-10);
        }
    }
}

TEST_CASE("instance_norm constant channel gives zeros") {
    Tensor x = Tensor::full({1, 2, 3, 3}, 4.2, DType::F64);
    for (double v : instance_norm(x).to_vector()) CHECK(v == 0.0);
}

TEST_CASE("adain identity affine equals instance_norm") {
    Rng rng(12);
    Tensor x = rand_t({2, 3, 4, 4}, rng);
    Tensor gamma = Tensor::full({3}, 1.0, DType::F64);
    Tensor beta = Tensor::zeros({3}, DType::F64);
    CHECK(max_abs_diff(adain(x, gamma, beta), instance_norm(x)) == 0.0);
}

TEST_CASE("adain moments follow gamma and beta") {
    Rng rng(13);
    Tensor x = rand_t({1, 2, 8, 8}, rng, DType::F64, -1.0, 3.0);
    Tensor gamma = Tensor::full({2}, 2.0, DType::F64);
    Tensor beta = Tensor::full({2}, 0.5, DType::F64);
    Tensor y = adain(x, gamma, beta);
    auto yv = y.to_vector();
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < 64; ++i) mean += yv[c * 64 + i];
        mean /= 64;
        for (int i = 0; i < 64; ++i) var += (yv[c * 64 + i] - mean) * (yv[c * 64 + i] - mean);
        var /= 64;
        CHECK(std::abs(mean - 0.5) < 1e-5);
        CHECK(std::abs(std::sqrt(var) - 2.0) < 1e-3);
    }
}

TEST_CASE("adain hand-computed z-scores") {
    std::vector<double> vals = {1, 2, 3, 4};
    Tensor x = Tensor::from_data({1, 1, 2, 2}, std::span<const double>(vals), DType::F64);
    Tensor gamma = Tensor::full({1}, 1.0, DType::F64);
    Tensor beta = Tensor::zeros({1}, DType::F64);
    Tensor y = adain(x, gamma, beta, 1e-5);
    const double mean = 2.5;
    const double var = (2.25 + 0.25 + 0.25 + 2.25) / 4.0;
    auto yv = y.to_vector();
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(yv[i] - (vals[i] - mean) / std::sqrt(var + 1e-5)) < 1e-10);
}

TEST_CASE("spectral_normalize diagonal case") {
    ParamStore store;
    Rng rng(14);
    std::vector<double> d = {3, 0, 0, 1};
    Parameter& p = store.add("w", Tensor::from_data({2, 2}, std::span<const double>(d), DType::F64), true, &rng);
    Tensor y = spectral_normalize(p, 100);
    auto yv = y.to_vector();
    CHECK(std::abs(yv[0] - 1.0) < 1e-8);
    CHECK(std::abs(yv[1]) < 1e-8);
    CHECK(std::abs(yv[2]) < 1e-8);
    CHECK(std::abs(yv[3] - 1.0 / 3.0) < 1e-8);
}

TEST_CASE("spectral_normalize leaves orthogonal matrices unchanged") {
    ParamStore store;
    Rng rng(15);
    const double c = std::cos(0.7), s = std::sin(0.7);
    std::vector<double> q = {c, -s, s, c};
    Parameter& p = store.add("w", Tensor::from_data({2, 2}, std::span<const double>(q), DType::F64), true, &rng);
    Tensor y = spectral_normalize(p, 50);
    auto yv = y.to_vector();
    for (int i = 0; i < 4; ++i) CHECK(std::abs(yv[i] - q[i]) < 1e-6);
}

TEST_CASE("spectral_normalize drives top singular value to one") {
    ParamStore store;
    Rng rng(16);
    Parameter& p = store.add("w", Tensor::randn({8, 8}, rng, DType::F64, 1.5), true, &rng);
    Tensor y = spectral_normalize(p, 50);
    const double sigma = testutil::top_singular_value_oracle(y.to_vector(), 8, 8);
    CHECK(std::abs(sigma - 1.0) < 1e-2);
    CHECK(sigma > 0.98);
    CHECK(sigma < 1.02);
}

TEST_CASE("spectral_normalize is idempotent within tolerance") {
    ParamStore store;
    Rng rng(17);
    Parameter& p = store.add("w", Tensor::randn({6, 10}, rng, DType::F64, 2.0), true, &rng);
    Tensor y1 = spectral_normalize(p, 50);
    ParamStore store2;
    Parameter& p2 = store2.add("w", y1.detach(), true, &rng);
    Tensor y2 = spectral_normalize(p2, 50);
    // Operator-norm difference bounded by Frobenius norm of the difference.
    double fro = 0.0;
    auto a = y1.to_vector();
    auto b = y2.to_vector();
    for (std::size_t i = 0; i < a.size(); ++i) fro += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(std::sqrt(fro) < 1e-2);
}

TEST_CASE("spectral_normalize of zero matrix is zero") {
    ParamStore store;
    Rng rng(18);
    Parameter& p = store.add("w", Tensor::zeros({3, 3}, DType::F64), true, &rng);
    for (double v : spectral_normalize(p, 5).to_vector()) CHECK(v == 0.0);
}

TEST_CASE("upsample_nearest definition and round trip") {
    std::vector<double> v = {1, 2, 3, 4};
    Tensor x = Tensor::from_data({1, 1, 2, 2}, std::span<const double>(v), DType::F64);
    Tensor y = upsample_nearest(x, 2);
    std::vector<double> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(max_abs_diff(y, expect) == 0.0);

    CHECK(max_abs_diff(upsample_nearest(x, 1), x) == 0.0);

    Rng rng(19);
    Tensor r = rand_t({2, 3, 4, 5}, rng);
    Tensor up = upsample_nearest(r, 2);
    // Stride-2 subsample recovers the input exactly.
    auto uv = up.to_vector();
    auto rv = r.to_vector();
    const std::int64_t H = 4, W = 5;
    for (std::int64_t b = 0; b < 6; ++b)
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j)
                CHECK(uv[b * 4 * H * W + (2 * i) * 2 * W + 2 * j] == rv[b * H * W + i * W + j]);
}

TEST_CASE("activation values") {
    std::vector<double> v = {-1.0, 0.0, 2.0};
    Tensor x = Tensor::from_data({3}, std::span<const double>(v), DType::F64);
    auto r = relu(x).to_vector();
    CHECK(r[0] == 0.0);
    CHECK(r[2] == 2.0);
    auto l = leaky_relu(x, 0.2).to_vector();
    CHECK(l[0] == doctest::Approx(-0.2).epsilon(1e-12));
    auto s = sigmoid(x).to_vector();
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));
    auto t = tanh_op(x).to_vector();
    CHECK(t[1] == 0.0);
}

TEST_CASE("backward on linear and quadratic sums") {
    Rng rng(20);
    Tensor x = rand_t({4, 3}, rng, DType::F64, -2.0, 2.0, true);
    Tensor loss = sum_all(x);
    loss.backward();
    for (double g : x.grad().to_vector()) CHECK(g == 1.0);

    Tensor x2 = rand_t({5}, rng, DType::F64, -2.0, 2.0, true);
    Tensor loss2 = sum_all(square(x2));
    loss2.backward();
    auto g2 = x2.grad().to_vector();
    auto xv = x2.to_vector();
    for (int i = 0; i < 5; ++i) CHECK(g2[i] == doctest::Approx(2 * xv[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss") {
    Rng rng(21);
    Tensor x = rand_t({3}, rng, DType::F64, -1.0, 1.0, true);
    Tensor y = square(x);
    CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}

TEST_CASE("grad accumulates across reuse") {
    Tensor x = Tensor::full({1}, 3.0, DType::F64);
    x.set_requires_grad(true);
    Tensor y = add(mul(x, x), x); // x^2 + x -> dy/dx = 2x + 1 = 7
    y.backward();
    CHECK(x.grad().item() == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("adam zero gradient is a fixed point") {
    ParamStore store;
    Tensor w = Tensor::full({3}, 1.5, DType::F64);
    Parameter& p = store.add("w", std::move(w));
    p.tensor.node()->ensure_grad();
    Adam opt(AdamOpts{0.1, 0.9, 0.999, 1e-8});
    opt.step(store.all());
    for (double v : p.tensor.to_vector()) CHECK(v == 1.5);
}

TEST_CASE("adam first step magnitude is about lr") {
    ParamStore store;
    Parameter& p = store.add("w", Tensor::zeros({1}, DType::F64));
    Tensor loss = sum_all(p.tensor); // grad = 1
    loss.backward();
    Adam opt(AdamOpts{0.1, 0.5, 0.999, 1e-8});
    opt.step(store.all());
    CHECK(std::abs(std::abs(p.tensor.item()) - 0.1) < 1e-6);
}

TEST_CASE("adam converges on (w-3)^2") {
    ParamStore store;
    Parameter& p = store.add("w", Tensor::zeros({1}, DType::F64));
    Adam opt(AdamOpts{0.1, 0.5, 0.999, 1e-8});
    for (int i = 0; i < 100; ++i) {
        store.zero_grad();
        Tensor diff = affine(p.tensor, 1.0, -3.0);
        Tensor loss = sum_all(square(diff));
        loss.backward();
        opt.step(store.all());
    }
    CHECK(std::abs(p.tensor.item() - 3.0) < 0.1);
}

TEST_CASE("f32 tensors run the same ops") {
    Rng rng(22);
    Tensor a = rand_t({3, 4}, rng, DType::F32);
    Tensor b = rand_t({4, 2}, rng, DType::F32);
    Tensor c = matmul(a, b);
    CHECK(c.dtype() == DType::F32);
    auto oracle = testutil::matmul_oracle(a.to_vector(), b.to_vector(), 3, 4, 2);
    CHECK(max_abs_diff(c, oracle) < 1e-5);
}

TEST_CASE("forward ops stay finite on finite inputs") {
    Rng rng(23);
    Tensor x = rand_t({2, 4, 8, 8}, rng, DType::F64, -50.0, 50.0);
    for (const Tensor& t : {softmax(x, 1), instance_norm(x), sigmoid(x), softplus(x), tanh_op(x)})
        for (double v : t.to_vector()) CHECK(std::isfinite(v));
}
