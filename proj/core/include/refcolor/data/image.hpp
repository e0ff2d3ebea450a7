#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace refcolor::data {

// Row-major H x W x C image with values in [0,1]. C is 1 or 3.
struct Image {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<float> px;

    Image() = default;
    Image(int h_, int w_, int c_, float fill = 0.0f)
        : h(h_), w(w_), c(c_), px(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

    float& at(int y, int x, int ch) { return px[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return px[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    bool empty() const { return px.empty(); }
    std::size_t size() const { return px.size(); }
};

// A color frame with its derived line art and normalized distance field.
// Line polarity: ink = 0, background = 1.
struct Frame {
    Image color; // H x W x 3
    Image line;  // H x W x 1
    Image dist;  // H x W x 1
};

struct Sequence {
    std::vector<Frame> frames;
    std::string source_id;
};

// K reference triples (line, dist, color) conditioning the generator.
struct ReferenceSet {
    std::vector<Frame> refs;
};

double mean_luminance(const Image& color);
// Per-channel standard deviation, maximum over channels.
double max_channel_std(const Image& color);

} // namespace refcolor::data
