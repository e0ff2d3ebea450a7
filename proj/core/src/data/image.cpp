#include "refcolor/data/image.hpp"

#include <cmath>

namespace refcolor::data {

double mean_luminance(const Image& color) {
    if (color.empty()) return 0.0;
    double acc = 0.0;
    const std::size_t n = static_cast<std::size_t>(color.h) * color.w;
    for (int y = 0; y < color.h; ++y)
        for (int x = 0; x < color.w; ++x) {
            if (color.c == 3)
                acc += 0.299 * color.at(y, x, 0) + 0.587 * color.at(y, x, 1) + 0.114 * color.at(y, x, 2);
            else
                acc += color.at(y, x, 0);
        }
    return acc / static_cast<double>(n);
}

double max_channel_std(const Image& color) {
    double worst = 0.0;
    const double n = static_cast<double>(color.h) * color.w;
    for (int ch = 0; ch < color.c; ++ch) {
        double mean = 0.0;
        for (int y = 0; y < color.h; ++y)
            for (int x = 0; x < color.w; ++x) mean += color.at(y, x, ch);
        mean /= n;
        double var = 0.0;
        for (int y = 0; y < color.h; ++y)
            for (int x = 0; x < color.w; ++x) {
                const double d = color.at(y, x, ch) - mean;
                var += d * d;
            }
        worst = std::max(worst, std::sqrt(var / n));
    }
    return worst;
}

} // namespace refcolor::data
