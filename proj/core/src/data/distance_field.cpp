#include <cmath>
#include <limits>
#include <vector>

#include "refcolor/data/dataprep.hpp"

namespace refcolor::data {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform by the lower envelope of parabolas.
// d[q] = min_p (q - p)^2 + f[p]. Sites with f = inf are skipped.
void dt1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
          std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
                if (k < 0) break;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = q - v[j];
        d[q] = dq * dq + f[v[j]];
    }
}

} // namespace

Image distance_field(const Image& line) {
    const int H = line.h, W = line.w;
    Image out(H, W, 1);
    const double diag = std::sqrt(static_cast<double>(H) * H + static_cast<double>(W) * W);

    // Pass 1: per-column transform of the line indicator.
    std::vector<double> g(static_cast<std::size_t>(H) * W);
    {
        std::vector<double> f(static_cast<std::size_t>(H)), d(static_cast<std::size_t>(H));
        std::vector<int> v(static_cast<std::size_t>(H));
        std::vector<double> z(static_cast<std::size_t>(H) + 1);
        for (int x = 0; x < W; ++x) {
            for (int y = 0; y < H; ++y) f[static_cast<std::size_t>(y)] = line.at(y, x, 0) < 0.5f ? 0.0 : kInf;
            dt1d(f, d, v, z);
            for (int y = 0; y < H; ++y) g[static_cast<std::size_t>(y) * W + x] = d[static_cast<std::size_t>(y)];
        }
    }
    // Pass 2: per-row transform of the column distances.
    {
        std::vector<double> f(static_cast<std::size_t>(W)), d(static_cast<std::size_t>(W));
        std::vector<int> v(static_cast<std::size_t>(W));
        std::vector<double> z(static_cast<std::size_t>(W) + 1);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) f[static_cast<std::size_t>(x)] = g[static_cast<std::size_t>(y) * W + x];
            dt1d(f, d, v, z);
            for (int x = 0; x < W; ++x) {
                const double sq = d[static_cast<std::size_t>(x)];
                double val = sq == kInf ? 1.0 : std::sqrt(sq) / diag;
                if (val > 1.0) val = 1.0;
                out.at(y, x, 0) = static_cast<float>(val);
            }
        }
    }
    return out;
}

} // namespace refcolor::data
