#include "refcolor/verify/suite.hpp"

#include "refcolor/color/colornet.hpp"
#include "refcolor/engine/gradcheck.hpp"
#include "refcolor/loss/losses.hpp"
#include "refcolor/temporal/temporalnet.hpp"

namespace refcolor::verify {

namespace {

Tensor probe(const Tensor& t, std::uint64_t seed) {
    Rng pr(seed);
    Tensor w = Tensor::rand_uniform(t.shape(), pr, DType::F64, -1.0, 1.0);
    return sum_all(mul(t, w));
}

CheckResult run_one(const std::string& name, const std::function<Tensor()>& forward,
                    const std::vector<std::pair<std::string, Tensor>>& leaves,
                    std::int64_t coords_per_leaf = 0) {
    GradCheckOpts opts;
    opts.max_coords_per_leaf = coords_per_leaf;
    GradCheckResult res = gradcheck(forward, leaves, opts);
    return {name, res.max_rel_err, res.checked, res.passed(opts.tol)};
}

Tensor leaf(std::vector<std::int64_t> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    return Tensor::rand_uniform(std::move(shape), rng, DType::F64, lo, hi, true);
}

} // namespace

std::vector<CheckResult> run_op_checks() {
    std::vector<CheckResult> out;

    {
        Tensor a = leaf({4, 5}, 11), b = leaf({5, 3}, 12);
        out.push_back(run_one("matmul", [&] { return probe(matmul(a, b), 1); }, {{"a", a}, {"b", b}}));
    }
    {
        Tensor a = leaf({2, 3, 4}, 13), b = leaf({2, 4, 2}, 14);
        out.push_back(
            run_one("matmul_batched", [&] { return probe(matmul(a, b), 2); }, {{"a", a}, {"b", b}}));
    }
    {
        Tensor x = leaf({3, 6}, 15, -2.0, 2.0);
        out.push_back(run_one("softmax", [&] { return probe(softmax(x, 1), 3); }, {{"x", x}}));
    }
    {
        Tensor x = leaf({1, 3, 6, 6}, 16), w = leaf({4, 3, 3, 3}, 17, -0.5, 0.5), b = leaf({4}, 18);
        Conv2dOpts o;
        o.stride = 2;
        o.padding = 1;
        out.push_back(run_one("conv2d", [&] { return probe(conv2d(x, w, b, o), 4); },
                              {{"x", x}, {"w", w}, {"b", b}}));
        Conv2dOpts od;
        od.dilation = 2;
        od.padding = 2;
        out.push_back(run_one("conv2d_dilated", [&] { return probe(conv2d(x, w, b, od), 5); },
                              {{"x", x}, {"w", w}, {"b", b}}));
        Conv2dOpts oc;
        oc.padding = 1;
        oc.pad_mode = PadMode::Circular;
        out.push_back(run_one("conv2d_circular", [&] { return probe(conv2d(x, w, b, oc), 6); },
                              {{"x", x}, {"w", w}, {"b", b}}));
    }
    {
        Tensor x = leaf({1, 2, 4, 5, 5}, 19), w = leaf({3, 2, 3, 3, 3}, 20, -0.4, 0.4), b = leaf({3}, 21);
        Conv3dOpts o;
        o.pad_t = 1;
        o.pad_h = 1;
        o.pad_w = 1;
        o.stride_h = 2;
        o.stride_w = 2;
        out.push_back(run_one("conv3d", [&] { return probe(conv3d(x, w, b, o), 7); },
                              {{"x", x}, {"w", w}, {"b", b}}));
    }
    {
        Tensor x = leaf({2, 3, 4, 4}, 22, -1.0, 2.0);
        out.push_back(run_one("instance_norm", [&] { return probe(instance_norm(x), 8); }, {{"x", x}}));
        Tensor g = leaf({2, 3}, 23, 0.5, 1.5), b = leaf({2, 3}, 24, -0.5, 0.5);
        out.push_back(run_one("adain", [&] { return probe(adain(x, g, b), 9); },
                              {{"x", x}, {"gamma", g}, {"beta", b}}));
    }
    {
        ParamStore store;
        Rng rng(25);
        Parameter& p = store.add("w", Tensor::randn({4, 6}, rng, DType::F64, 1.0), true, &rng);
        (void)spectral_normalize(p, 30);
        out.push_back(run_one("spectral_normalize", [&] { return probe(spectral_normalize(p, 1), 10); },
                              {{"w", p.tensor}}));
    }
    {
        Tensor x = leaf({1, 2, 3, 3}, 26);
        out.push_back(
            run_one("upsample_nearest", [&] { return probe(upsample_nearest(x, 2), 11); }, {{"x", x}}));
        Tensor y = leaf({1, 2, 4, 4}, 27);
        out.push_back(run_one("avg_pool2d", [&] { return probe(avg_pool2d(y, 2), 12); }, {{"y", y}}));
    }
    {
        Tensor pos_t = leaf({3, 4}, 28, 0.2, 1.5);
        Tensor neg_t = leaf({3, 4}, 29, -1.5, -0.2);
        auto unary = [&](const char* name, Tensor (*f)(const Tensor&)) {
            out.push_back(
                run_one(std::string(name) + "_pos", [&] { return probe(f(pos_t), 13); }, {{"x", pos_t}}));
            out.push_back(
                run_one(std::string(name) + "_neg", [&] { return probe(f(neg_t), 14); }, {{"x", neg_t}}));
        };
        unary("relu", relu);
        unary("sigmoid", sigmoid);
        unary("tanh", tanh_op);
        unary("softplus", softplus);
        unary("abs", abs_op);
        unary("square", square);
        out.push_back(
            run_one("leaky_relu", [&] { return probe(leaky_relu(neg_t, 0.2), 15); }, {{"x", neg_t}}));
        out.push_back(run_one("affine", [&] { return probe(affine(pos_t, 0.7, -0.3), 16); }, {{"x", pos_t}}));
        out.push_back(run_one("neg", [&] { return probe(neg(pos_t), 17); }, {{"x", pos_t}}));
    }
    {
        Tensor a = leaf({2, 3, 4}, 30), b = leaf({2, 1, 4}, 31);
        out.push_back(run_one("add_broadcast", [&] { return probe(add(a, b), 18); }, {{"a", a}, {"b", b}}));
        out.push_back(run_one("sub_broadcast", [&] { return probe(sub(a, b), 19); }, {{"a", a}, {"b", b}}));
        out.push_back(run_one("mul_broadcast", [&] { return probe(mul(a, b), 20); }, {{"a", a}, {"b", b}}));
    }
    {
        Tensor x = leaf({2, 3, 4}, 32);
        out.push_back(run_one("sum_all", [&] { return sum_all(square(x)); }, {{"x", x}}));
        out.push_back(run_one("mean_all", [&] { return mean_all(square(x)); }, {{"x", x}}));
        out.push_back(run_one("mean_axes", [&] { return probe(mean_axes(x, {1}), 21); }, {{"x", x}}));
        out.push_back(run_one("sum_axes", [&] { return probe(sum_axes(x, {0, 2}), 22); }, {{"x", x}}));
        out.push_back(run_one("reshape", [&] { return probe(reshape(x, {4, 6}), 23); }, {{"x", x}}));
        out.push_back(run_one("permute", [&] { return probe(permute(x, {2, 0, 1}), 24); }, {{"x", x}}));
        out.push_back(run_one("slice", [&] { return probe(slice(x, 1, 1, 2), 25); }, {{"x", x}}));
        Tensor y = leaf({2, 2, 4}, 33);
        out.push_back(
            run_one("concat", [&] { return probe(concat({x, y}, 1), 26); }, {{"x", x}, {"y", y}}));
    }
    {
        // temporal_shift and gated_conv3d as composite module-level ops.
        Rng rng(34);
        temporal::TemporalNetConfig cfg = temporal::TemporalNetConfig::tiny(DType::F64);
        temporal::TemporalModel model(cfg, rng);
        Tensor v = leaf({1, 4, 3, 8, 8}, 35);
        auto& layer = model.enc_layers()[0];
        out.push_back(run_one(
            "temporal_shift",
            [&] { return probe(temporal::temporal_shift(v, layer.shift_gate), 27); },
            {{"v", v}, {"gate_w", layer.shift_gate.w->tensor}}));
        out.push_back(run_one(
            "gated_conv3d", [&] { return probe(layer(v), 28); },
            {{"v", v}, {"feat_w", layer.feature.w->tensor}, {"gate_w", layer.gate.w->tensor}}, 8));
    }
    return out;
}

std::vector<CheckResult> run_net_checks() {
    std::vector<CheckResult> out;

    {
        Rng rng(41);
        color::ColorNetConfig cfg = color::ColorNetConfig::tiny(DType::F64);
        color::ColorModel model(cfg, rng);
        for (auto* p : model.params().all())
            if (p->spectral) (void)spectral_normalize(*p, 50);

        Rng ir(42);
        color::GenInputs in;
        in.line = Tensor::rand_uniform({1, 1, 32, 32}, ir, DType::F64, 0.0, 1.0);
        in.dist = Tensor::rand_uniform({1, 1, 32, 32}, ir, DType::F64, 0.0, 1.0);
        for (int i = 0; i < 2; ++i) {
            in.ref_lines.push_back(Tensor::rand_uniform({1, 1, 32, 32}, ir, DType::F64, 0.0, 1.0));
            in.ref_dists.push_back(Tensor::rand_uniform({1, 1, 32, 32}, ir, DType::F64, 0.0, 1.0));
            in.ref_colors.push_back(Tensor::rand_uniform({1, 3, 32, 32}, ir, DType::F64, 0.0, 1.0));
        }
        std::vector<std::pair<std::string, Tensor>> leaves;
        for (auto* p : model.generator_params()) leaves.emplace_back(p->name, p->tensor);
        out.push_back(run_one(
            "tiny_color_generator",
            [&] {
                auto o = model.generator_forward(in);
                return add(add(probe(o.y_trans, 43), probe(o.y_sim, 44)), probe(o.y_mid, 45));
            },
            leaves, 2));

        std::vector<std::pair<std::string, Tensor>> dleaves;
        for (auto* p : model.discriminator_params()) dleaves.emplace_back(p->name, p->tensor);
        out.push_back(run_one(
            "color_discriminator",
            [&] { return sum_all(model.discriminate(in.line, in.ref_colors[0])); }, dleaves, 3));
    }
    {
        Rng rng(46);
        temporal::TemporalNetConfig cfg = temporal::TemporalNetConfig::tiny(DType::F64);
        temporal::TemporalModel model(cfg, rng);
        for (auto* p : model.params().all())
            if (p->spectral) (void)spectral_normalize(*p, 50);
        Rng ir(47);
        Tensor lines = Tensor::rand_uniform({1, 1, 3, 16, 16}, ir, DType::F64, 0.0, 1.0);
        Tensor colors = Tensor::rand_uniform({1, 3, 3, 16, 16}, ir, DType::F64, 0.0, 1.0);
        std::vector<std::pair<std::string, Tensor>> gleaves;
        for (auto* p : model.generator_params()) gleaves.emplace_back(p->name, p->tensor);
        out.push_back(run_one(
            "temporal_generator", [&] { return probe(model.refine_sequence(lines, colors), 48); },
            gleaves, 2));
        std::vector<std::pair<std::string, Tensor>> dleaves;
        for (auto* p : model.discriminator_params()) dleaves.emplace_back(p->name, p->tensor);
        out.push_back(run_one(
            "patch_discriminator", [&] { return probe(model.patch_discriminate(lines, colors), 49); },
            dleaves, 3));
    }
    {
        loss::FeaturePyramid pyr(51, DType::F64, {2, 4, 8, 16, 32});
        Rng ir(52);
        Tensor pred = Tensor::rand_uniform({1, 3, 32, 32}, ir, DType::F64, 0.05, 0.95, true);
        Tensor target = Tensor::rand_uniform({1, 3, 32, 32}, ir, DType::F64, 0.0, 1.0);
        out.push_back(run_one(
            "loss_stack",
            [&] {
                loss::LossParts parts;
                parts.l1 = loss::l1_loss(pred, target);
                parts.perc = loss::perceptual_loss(pyr, pred, target);
                parts.style = loss::style_loss(pyr, pred, target);
                parts.latent = loss::latent_loss(pred, pred, target);
                parts.gan = loss::gan_losses(reshape(mean_all(pred), {1, 1}),
                                             reshape(mean_all(square(pred)), {1, 1}))
                                .g;
                return loss::total_loss(parts, {});
            },
            {{"pred", pred}}, 32));
    }
    return out;
}

} // namespace refcolor::verify
