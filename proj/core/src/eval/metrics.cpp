#include <cmath>
#include <stdexcept>

#include "refcolor/eval/metrics.hpp"

namespace refcolor::eval {

using data::Image;

double mse(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw std::invalid_argument("mse: image shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) {
        const double d = static_cast<double>(a.px[i]) - static_cast<double>(b.px[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.px.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(m));
}

namespace {

std::vector<double> to_gray(const Image& img) {
    std::vector<double> g(static_cast<std::size_t>(img.h) * img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double acc = 0.0;
            for (int c = 0; c < img.c; ++c) acc += img.at(y, x, c);
            g[static_cast<std::size_t>(y) * img.w + x] = acc / img.c;
        }
    return g;
}

} // namespace

double ssim(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw std::invalid_argument("ssim: image shape mismatch");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    if (a.h < kWin || a.w < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

    const auto ga = to_gray(a);
    const auto gb = to_gray(b);

    double kernel[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        kernel[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        ksum += kernel[i];
    }
    for (double& k : kernel) k /= ksum;

    const int H = a.h, W = a.w;
    const int OH = H - kWin + 1, OW = W - kWin + 1;

    // Separable Gaussian filtering of the five moment maps.
    auto filter = [&](const std::vector<double>& src) {
        std::vector<double> tmp(static_cast<std::size_t>(H) * OW);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < OW; ++x) {
                double acc = 0.0;
                for (int k = 0; k < kWin; ++k) acc += kernel[k] * src[static_cast<std::size_t>(y) * W + x + k];
                tmp[static_cast<std::size_t>(y) * OW + x] = acc;
            }
        std::vector<double> out(static_cast<std::size_t>(OH) * OW);
        for (int y = 0; y < OH; ++y)
            for (int x = 0; x < OW; ++x) {
                double acc = 0.0;
                for (int k = 0; k < kWin; ++k) acc += kernel[k] * tmp[static_cast<std::size_t>(y + k) * OW + x];
                out[static_cast<std::size_t>(y) * OW + x] = acc;
            }
        return out;
    };

    std::vector<double> aa(ga.size()), bb(ga.size()), ab(ga.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
        aa[i] = ga[i] * ga[i];
        bb[i] = gb[i] * gb[i];
        ab[i] = ga[i] * gb[i];
    }
    const auto mu_a = filter(ga), mu_b = filter(gb);
    const auto m_aa = filter(aa), m_bb = filter(bb), m_ab = filter(ab);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double va = m_aa[i] - mu_a[i] * mu_a[i];
        const double vb = m_bb[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
        total += num / den;
    }
    return total / static_cast<double>(mu_a.size());
}

void eigen_symmetric(std::vector<double> m, int n, std::vector<double>& values,
                     std::vector<double>& vectors) {
    vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vectors[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto at = [&](std::vector<double>& mat, int i, int j) -> double& {
        return mat[static_cast<std::size_t>(i) * n + j];
    };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += at(m, i, j) * at(m, i, j);
        if (off < 1e-22) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(m, p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = at(m, p, p), aqq = at(m, q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double mkp = at(m, k, p), mkq = at(m, k, q);
                    at(m, k, p) = c * mkp - s * mkq;
                    at(m, k, q) = s * mkp + c * mkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double mpk = at(m, p, k), mqk = at(m, q, k);
                    at(m, p, k) = c * mpk - s * mqk;
                    at(m, q, k) = s * mpk + c * mqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = at(vectors, k, p), vkq = at(vectors, k, q);
                    at(vectors, k, p) = c * vkp - s * vkq;
                    at(vectors, k, q) = s * vkp + c * vkq;
                }
            }
    }
    values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i) * n + i];
}

namespace {

struct Gaussian {
    std::vector<double> mean;
    std::vector<double> cov; // row-major E x E
    int dim = 0;
};

Gaussian fit(const std::vector<std::vector<double>>& feats) {
    Gaussian g;
    const auto n = feats.size();
    g.dim = static_cast<int>(feats.front().size());
    const int E = g.dim;
    g.mean.assign(static_cast<std::size_t>(E), 0.0);
    for (const auto& f : feats)
        for (int i = 0; i < E; ++i) g.mean[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
    for (auto& v : g.mean) v /= static_cast<double>(n);
    g.cov.assign(static_cast<std::size_t>(E) * E, 0.0);
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (const auto& f : feats)
        for (int i = 0; i < E; ++i)
            for (int j = 0; j < E; ++j)
                g.cov[static_cast<std::size_t>(i) * E + j] += (f[static_cast<std::size_t>(i)] - g.mean[static_cast<std::size_t>(i)]) *
                                                              (f[static_cast<std::size_t>(j)] - g.mean[static_cast<std::size_t>(j)]) / denom;
    for (int i = 0; i < E; ++i) g.cov[static_cast<std::size_t>(i) * E + i] += 1e-6;
    return g;
}

// B = V f(L) V^T for a symmetric matrix with eigenpairs (L, V).
std::vector<double> sym_apply(const std::vector<double>& m, int n, double (*f)(double)) {
    std::vector<double> values, vectors;
    eigen_symmetric(m, n, values, vectors);
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int k = 0; k < n; ++k) {
        const double fv = f(std::max(values[static_cast<std::size_t>(k)], 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(i) * n + j] +=
                    fv * vectors[static_cast<std::size_t>(i) * n + k] * vectors[static_cast<std::size_t>(j) * n + k];
    }
    return out;
}

} // namespace

double frechet_from_features(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("frechet_from_features: each set needs at least 2 samples");
    Gaussian ga = fit(a), gb = fit(b);
    if (ga.dim != gb.dim) throw std::invalid_argument("frechet_from_features: feature dim mismatch");
    const int E = ga.dim;

    double mean_term = 0.0;
    for (int i = 0; i < E; ++i) {
        const double d = ga.mean[static_cast<std::size_t>(i)] - gb.mean[static_cast<std::size_t>(i)];
        mean_term += d * d;
    }

    // tr(sqrt(S_a^1/2 S_b S_a^1/2)) via the symmetrized product.
    std::vector<double> a_half = sym_apply(ga.cov, E, [](double v) { return std::sqrt(v); });
    std::vector<double> tmp(static_cast<std::size_t>(E) * E, 0.0), sym(static_cast<std::size_t>(E) * E, 0.0);
    for (int i = 0; i < E; ++i)
        for (int k = 0; k < E; ++k) {
            const double av = a_half[static_cast<std::size_t>(i) * E + k];
            if (av == 0.0) continue;
            for (int j = 0; j < E; ++j)
                tmp[static_cast<std::size_t>(i) * E + j] += av * gb.cov[static_cast<std::size_t>(k) * E + j];
        }
    for (int i = 0; i < E; ++i)
        for (int k = 0; k < E; ++k) {
            const double tv = tmp[static_cast<std::size_t>(i) * E + k];
            if (tv == 0.0) continue;
            for (int j = 0; j < E; ++j)
                sym[static_cast<std::size_t>(i) * E + j] += tv * a_half[static_cast<std::size_t>(k) * E + j];
        }
    // Enforce exact symmetry against fp drift before the eigensolve.
    for (int i = 0; i < E; ++i)
        for (int j = i + 1; j < E; ++j) {
            const double v = 0.5 * (sym[static_cast<std::size_t>(i) * E + j] + sym[static_cast<std::size_t>(j) * E + i]);
            sym[static_cast<std::size_t>(i) * E + j] = v;
            sym[static_cast<std::size_t>(j) * E + i] = v;
        }
    std::vector<double> values, vectors;
    eigen_symmetric(sym, E, values, vectors);
    double tr_sqrt = 0.0;
    for (double v : values) tr_sqrt += std::sqrt(std::max(v, 0.0));

    double tr_a = 0.0, tr_b = 0.0;
    for (int i = 0; i < E; ++i) {
        tr_a += ga.cov[static_cast<std::size_t>(i) * E + i];
        tr_b += gb.cov[static_cast<std::size_t>(i) * E + i];
    }
    return mean_term + tr_a + tr_b - 2.0 * tr_sqrt;
}

} // namespace refcolor::eval
