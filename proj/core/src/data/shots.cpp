#include <cmath>
#include <stdexcept>

#include "refcolor/data/dataprep.hpp"

namespace refcolor::data {

std::vector<double> histogram_feature(const Image& color) {
    if (color.c != 3) throw std::invalid_argument("histogram_feature: expects a 3-channel image");
    std::vector<double> feat(768, 0.0);
    for (int y = 0; y < color.h; ++y)
        for (int x = 0; x < color.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                const float v = color.at(y, x, ch);
                int bin = static_cast<int>(std::floor(static_cast<double>(v) * 255.0));
                if (bin < 0) bin = 0;
                if (bin > 255) bin = 255;
                feat[static_cast<std::size_t>(ch * 256 + bin)] += 1.0;
            }
    return feat;
}

double histogram_mse(const std::vector<double>& fa, const std::vector<double>& fb, int h, int w,
                     const ShotSplitOpts& opts) {
    // Counts are rescaled to the reference 256x256 frame area so the cut
    // thresholds keep their meaning at other resolutions.
    const double scale = opts.normalize_histograms
                             ? 1.0 / (static_cast<double>(h) * w)
                             : 65536.0 / (static_cast<double>(h) * w);
    double acc = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        const double d = (fa[i] - fb[i]) * scale;
        acc += d * d;
    }
    return acc / static_cast<double>(fa.size());
}

std::vector<std::vector<Image>> split_shots(const std::vector<Image>& frames, const ShotSplitOpts& opts) {
    if (frames.empty()) throw std::invalid_argument("split_shots: needs at least one frame");
    const int h = frames.front().h, w = frames.front().w;

    std::vector<std::vector<double>> feats;
    feats.reserve(frames.size());
    for (const auto& f : frames) feats.push_back(histogram_feature(f));

    // Cut whenever consecutive feature MSE exceeds the threshold.
    std::vector<std::pair<std::size_t, std::size_t>> spans; // [begin, end)
    std::size_t begin = 0;
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (histogram_mse(feats[i - 1], feats[i], h, w, opts) > opts.cut_threshold) {
            spans.emplace_back(begin, i);
            begin = i;
        }
    }
    spans.emplace_back(begin, frames.size());

    std::vector<std::vector<Image>> shots;
    for (auto [b, e] : spans) {
        const std::size_t len = e - b;
        if (len < static_cast<std::size_t>(opts.min_length)) continue;

        // Drop shots where every frame pair is nearly identical.
        bool any_pair_differs = false;
        for (std::size_t i = b; i < e && !any_pair_differs; ++i)
            for (std::size_t j = i + 1; j < e; ++j)
                if (histogram_mse(feats[i], feats[j], h, w, opts) >= opts.uniform_threshold) {
                    any_pair_differs = true;
                    break;
                }
        if (!any_pair_differs) continue;

        // Drop too-dark or too-faded shots.
        double lum = 0.0, spread = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            lum += mean_luminance(frames[i]);
            spread += max_channel_std(frames[i]);
        }
        lum /= static_cast<double>(len);
        spread /= static_cast<double>(len);
        if (lum < opts.min_luminance || spread < opts.min_channel_std) continue;

        shots.emplace_back(frames.begin() + static_cast<std::ptrdiff_t>(b),
                           frames.begin() + static_cast<std::ptrdiff_t>(e));
    }
    return shots;
}

Window sample_window(const Sequence& seq, Rng& rng) {
    if (seq.frames.size() < 8)
        throw std::invalid_argument("sample_window: sequence shorter than 8 frames");
    const std::size_t start =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(seq.frames.size()) - 8));
    Window w;
    w.start = start;
    w.refs.refs.push_back(seq.frames[start]);
    w.refs.refs.push_back(seq.frames[start + 7]);
    for (std::size_t i = 1; i <= 6; ++i) w.targets.push_back(seq.frames[start + i]);
    return w;
}

} // namespace refcolor::data
