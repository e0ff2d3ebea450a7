#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "refcolor/data/dataprep.hpp"
#include "refcolor/eval/evaluate.hpp"

using namespace refcolor;
using namespace refcolor::eval;
using data::Image;

namespace {

Image rand_image(int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, c);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

train::TrainConfig tiny_cfg(std::uint64_t seed) {
    train::TrainConfig cfg;
    cfg.seed = seed;
    cfg.precision = "f32";
    cfg.image_size = 32;
    cfg.batch = 1;
    cfg.enc_channels = {4, 8, 16};
    cfg.embed_channels = {8, 8, 16, 16, 16};
    cfg.disc_channels = {8, 16, 16, 16};
    cfg.temporal_enc_channels = {8, 16, 32};
    cfg.temporal_dec_channels = {16, 8};
    cfg.temporal_disc_channels = {8, 16, 16, 16};
    cfg.pyramid_channels = {4, 8, 16, 32, 64};
    return cfg;
}

// Naive sliding-window SSIM with an explicit 2-D Gaussian kernel.
double ssim_oracle(const Image& a, const Image& b) {
    const int H = a.h, W = a.w;
    std::vector<double> ga(static_cast<std::size_t>(H) * W), gb(ga.size());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double sa = 0, sb = 0;
            for (int c = 0; c < a.c; ++c) {
                sa += a.at(y, x, c);
                sb += b.at(y, x, c);
            }
            ga[static_cast<std::size_t>(y) * W + x] = sa / a.c;
            gb[static_cast<std::size_t>(y) * W + x] = sb / b.c;
        }
    double k1d[11], ksum = 0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5.0;
        k1d[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        ksum += k1d[i];
    }
    for (double& v : k1d) v /= ksum;
    double k2d[11][11];
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) k2d[i][j] = k1d[i] * k1d[j];

    const double C1 = 0.0001, C2 = 0.0009;
    double total = 0;
    int count = 0;
    for (int y = 0; y + 11 <= H; ++y)
        for (int x = 0; x + 11 <= W; ++x) {
            double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double va = ga[static_cast<std::size_t>(y + i) * W + x + j];
                    const double vb = gb[static_cast<std::size_t>(y + i) * W + x + j];
                    ma += k2d[i][j] * va;
                    mb += k2d[i][j] * vb;
                    maa += k2d[i][j] * va * va;
                    mbb += k2d[i][j] * vb * vb;
                    mab += k2d[i][j] * va * vb;
                }
            const double var_a = maa - ma * ma, var_b = mbb - mb * mb, cov = mab - ma * mb;
            total += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                     ((ma * ma + mb * mb + C1) * (var_a + var_b + C2));
            ++count;
        }
    return total / count;
}

} // namespace

TEST_CASE("psnr formula, cap, oracle, and mse relation") {
    Image a(16, 16, 3, 0.0f);
    Image b(16, 16, 3, 0.1f);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-7)); // MSE = 0.01 up to f32 rounding of 0.1

    CHECK(psnr(a, a) == 100.0);

    Image x = rand_image(8, 8, 3, 42);
    Image y = rand_image(8, 8, 3, 43);
    double m = 0;
    for (std::size_t i = 0; i < x.px.size(); ++i) {
        const double d = static_cast<double>(x.px[i]) - y.px[i];
        m += d * d;
    }
    m /= static_cast<double>(x.px.size());
    CHECK(std::abs(psnr(x, y) - (-10.0 * std::log10(m))) < 1e-9);
    CHECK(std::abs(psnr(x, y) + 10.0 * std::log10(mse(x, y))) < 1e-12);

    Image z(4, 4, 3, 0.0f);
    CHECK_THROWS_AS(mse(x, z), std::invalid_argument);
}

TEST_CASE("ssim identity, constant closed form, oracle, symmetry") {
    Image a = rand_image(20, 20, 3, 44);
    CHECK(ssim(a, a) == 1.0);

    Image zero(16, 16, 3, 0.0f);
    Image one(16, 16, 3, 1.0f);
    const double c1 = 0.0001;
    const double closed = c1 / (1.0 + c1);
    CHECK(std::abs(ssim(zero, one) - closed) < 1e-9);

    Image b = rand_image(20, 20, 3, 45);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-9);

    Image small(8, 8, 3, 0.5f);
    CHECK_THROWS_AS(ssim(small, small), std::invalid_argument);
}

TEST_CASE("frechet distance identity, closed form, symmetry") {
    Rng rng(46);
    const int E = 6;
    auto cloud = [&](const std::vector<double>& mu, const std::vector<double>& amp) {
        // mu +/- amp_i e_i: sample mean mu exactly, diagonal covariance
        // 2 amp_i^2 / (2E - 1) exactly.
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < E; ++i)
            for (double s : {1.0, -1.0}) {
                auto p = mu;
                p[static_cast<std::size_t>(i)] += s * amp[static_cast<std::size_t>(i)];
                pts.push_back(p);
            }
        return pts;
    };
    std::vector<double> mu_a(E), mu_b(E), amp_a(E), amp_b(E);
    for (int i = 0; i < E; ++i) {
        mu_a[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
        mu_b[static_cast<std::size_t>(i)] = rng.uniform(-1, 1);
        amp_a[static_cast<std::size_t>(i)] = rng.uniform(0.5, 2.0);
        amp_b[static_cast<std::size_t>(i)] = rng.uniform(0.5, 2.0);
    }
    auto A = cloud(mu_a, amp_a);
    auto B = cloud(mu_b, amp_b);

    CHECK(std::abs(frechet_from_features(A, A)) < 1e-6);

    const double denom = 2.0 * E - 1.0;
    double closed = 0.0;
    for (int i = 0; i < E; ++i) {
        const double d = mu_a[static_cast<std::size_t>(i)] - mu_b[static_cast<std::size_t>(i)];
        const double va = 2.0 * amp_a[static_cast<std::size_t>(i)] * amp_a[static_cast<std::size_t>(i)] / denom;
        const double vb = 2.0 * amp_b[static_cast<std::size_t>(i)] * amp_b[static_cast<std::size_t>(i)] / denom;
        closed += d * d + va + vb - 2.0 * std::sqrt(va * vb);
    }
    CHECK(std::abs(frechet_from_features(A, B) - closed) < 1e-4);
    CHECK(std::abs(frechet_from_features(A, B) - frechet_from_features(B, A)) < 1e-8);
}

TEST_CASE("jacobi eigensolver reconstructs symmetric matrices") {
    Rng rng(47);
    const int n = 8;
    std::vector<double> m(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = rng.uniform(-1, 1);
            m[static_cast<std::size_t>(i) * n + j] = v;
            m[static_cast<std::size_t>(j) * n + i] = v;
        }
    std::vector<double> values, vectors;
    eigen_symmetric(m, n, values, vectors);
    // V L V^T == M
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int k = 0; k < n; ++k)
                acc += vectors[static_cast<std::size_t>(i) * n + k] * values[static_cast<std::size_t>(k)] *
                       vectors[static_cast<std::size_t>(j) * n + k];
            CHECK(std::abs(acc - m[static_cast<std::size_t>(i) * n + j]) < 1e-10);
        }
}

TEST_CASE("reference placement protocol") {
    CHECK(reference_indices(8, 2) == std::vector<std::size_t>{0, 7});
    CHECK(reference_indices(9, 3) == std::vector<std::size_t>{0, 4, 8});
    CHECK(reference_indices(10, 1) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(reference_indices(2, 3), std::invalid_argument);
}

TEST_CASE("ground truth as prediction reports perfect metrics") {
    data::SynthOpts so;
    so.n_frames = 8;
    so.size = 32;
    data::Sequence seq = data::synth_sequence(3000, so);
    std::vector<Image> preds;
    for (const auto& f : seq.frames) preds.push_back(f.color);
    auto refs = reference_indices(seq.frames.size(), 2);
    EvalReport rep = compute_report(preds, seq, refs, 2);
    CHECK(rep.frames.size() == 6);
    CHECK(rep.mean_mse == 0.0);
    CHECK(rep.mean_ssim == 1.0);
    CHECK(rep.mean_psnr == 100.0);
}

TEST_CASE("reference frames never enter the metric averages") {
    data::SynthOpts so;
    so.n_frames = 8;
    so.size = 32;
    data::Sequence seq = data::synth_sequence(3001, so);
    std::vector<Image> preds;
    for (const auto& f : seq.frames) preds.push_back(f.color);
    // Corrupt only the reference slots.
    preds[0] = Image(32, 32, 3, 0.0f);
    preds[7] = Image(32, 32, 3, 0.0f);
    auto refs = reference_indices(seq.frames.size(), 2);
    EvalReport rep = compute_report(preds, seq, refs, 2);
    CHECK(rep.mean_mse == 0.0);
    CHECK(rep.mean_psnr == 100.0);
    for (const auto& fm : rep.frames) {
        CHECK(fm.frame_index != 0);
        CHECK(fm.frame_index != 7);
    }
}

TEST_CASE("evaluate_sequence runs the full protocol on a tiny model") {
    train::TrainerState state = train::TrainerState::init(tiny_cfg(48));
    data::SynthOpts so;
    so.n_frames = 9;
    so.size = 32;
    data::Sequence seq = data::synth_sequence(3002, so);

    for (int k : {1, 2, 3}) {
        EvalReport rep = evaluate_sequence(state.bundle, seq, k, /*use_temporal=*/true);
        CHECK(rep.k == k);
        const auto refs = reference_indices(seq.frames.size(), k);
        CHECK(rep.frames.size() == seq.frames.size() - refs.size());
        CHECK(rep.mean_mse >= 0.0);
        CHECK(std::isfinite(rep.ffd));
    }
    CHECK_THROWS_AS(evaluate_sequence(state.bundle, seq, 10, true), std::invalid_argument);

    // The no-temporal variant must also produce full reports.
    EvalReport rep = evaluate_sequence(state.bundle, seq, 2, /*use_temporal=*/false);
    CHECK(rep.frames.size() == 7);
}

TEST_CASE("colorize_sequence output count matches the input") {
    train::TrainerState state = train::TrainerState::init(tiny_cfg(49));
    data::SynthOpts so;
    so.n_frames = 8;
    so.size = 32;
    data::Sequence seq = data::synth_sequence(3003, so);
    auto preds = colorize_sequence(state.bundle, seq, 2, true);
    CHECK(preds.size() == seq.frames.size());
    for (const auto& img : preds) {
        CHECK(img.h == 32);
        CHECK(img.c == 3);
    }
}
