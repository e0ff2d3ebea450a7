#include <algorithm>
#include <cmath>

#include "refcolor/data/dataprep.hpp"

namespace refcolor::data {

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = h - std::floor(h); // hue in turns
    const double i = std::floor(h * 6.0);
    const double f = h * 6.0 - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - f * s);
    const double t = v * (1.0 - (1.0 - f) * s);
    switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
    }
}

Image edges_from_color(const Image& color, double threshold) {
    const int H = color.h, W = color.w;
    // Edge pixels: max channel difference to any 4-neighbor above threshold.
    std::vector<std::uint8_t> edge(static_cast<std::size_t>(H) * W, 0);
    const int dy[4] = {-1, 1, 0, 0};
    const int dx[4] = {0, 0, -1, 1};
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            bool is_edge = false;
            for (int k = 0; k < 4 && !is_edge; ++k) {
                const int ny = y + dy[k], nx = x + dx[k];
                if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                double diff = 0.0;
                for (int ch = 0; ch < color.c; ++ch)
                    diff = std::max(diff, std::abs(static_cast<double>(color.at(y, x, ch)) -
                                                   static_cast<double>(color.at(ny, nx, ch))));
                if (diff > threshold) is_edge = true;
            }
            edge[static_cast<std::size_t>(y) * W + x] = is_edge ? 1 : 0;
        }
    // 3x3 dilation, then invert: ink = 0, background = 1.
    Image line(H, W, 1, 1.0f);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            bool ink = false;
            for (int oy = -1; oy <= 1 && !ink; ++oy)
                for (int ox = -1; ox <= 1; ++ox) {
                    const int ny = y + oy, nx = x + ox;
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    if (edge[static_cast<std::size_t>(ny) * W + nx]) {
                        ink = true;
                        break;
                    }
                }
            line.at(y, x, 0) = ink ? 0.0f : 1.0f;
        }
    return line;
}

namespace {

struct Shape {
    enum Kind { Disk, Rect, Polyline } kind = Disk;
    // Start and end positions of the anchor (interpolated across frames).
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double size0 = 0, size1 = 0; // radius / half-extent scale
    double aspect = 1.0;         // rect height/width ratio
    double r = 0, g = 0, b = 0;
    // Polyline vertices relative to the anchor, and stroke half-width.
    std::vector<std::pair<double, double>> verts;
    double stroke = 1.5;
};

double point_segment_dist2(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return dx * dx + dy * dy;
}

void paint(Image& img, const Shape& s, double t01) {
    const double cx = s.x0 + (s.x1 - s.x0) * t01;
    const double cy = s.y0 + (s.y1 - s.y0) * t01;
    const double sz = s.size0 + (s.size1 - s.size0) * t01;
    const int H = img.h, W = img.w;
    auto put = [&](int y, int x) {
        if (y < 0 || y >= H || x < 0 || x >= W) return;
        img.at(y, x, 0) = static_cast<float>(s.r);
        img.at(y, x, 1) = static_cast<float>(s.g);
        img.at(y, x, 2) = static_cast<float>(s.b);
    };
    switch (s.kind) {
    case Shape::Disk: {
        const int lo_y = static_cast<int>(std::floor(cy - sz)), hi_y = static_cast<int>(std::ceil(cy + sz));
        const int lo_x = static_cast<int>(std::floor(cx - sz)), hi_x = static_cast<int>(std::ceil(cx + sz));
        for (int y = lo_y; y <= hi_y; ++y)
            for (int x = lo_x; x <= hi_x; ++x) {
                const double dx = x - cx, dy = y - cy;
                if (dx * dx + dy * dy <= sz * sz) put(y, x);
            }
        break;
    }
    case Shape::Rect: {
        const double hw = sz, hh = sz * s.aspect;
        for (int y = static_cast<int>(std::floor(cy - hh)); y <= static_cast<int>(std::ceil(cy + hh)); ++y)
            for (int x = static_cast<int>(std::floor(cx - hw)); x <= static_cast<int>(std::ceil(cx + hw)); ++x)
                if (std::abs(x - cx) <= hw && std::abs(y - cy) <= hh) put(y, x);
        break;
    }
    case Shape::Polyline: {
        const double r2 = s.stroke * s.stroke;
        double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
        for (auto [vx, vy] : s.verts) {
            min_x = std::min(min_x, cx + vx * sz);
            max_x = std::max(max_x, cx + vx * sz);
            min_y = std::min(min_y, cy + vy * sz);
            max_y = std::max(max_y, cy + vy * sz);
        }
        for (int y = static_cast<int>(std::floor(min_y - s.stroke)); y <= static_cast<int>(std::ceil(max_y + s.stroke)); ++y)
            for (int x = static_cast<int>(std::floor(min_x - s.stroke)); x <= static_cast<int>(std::ceil(max_x + s.stroke)); ++x) {
                for (std::size_t i = 0; i + 1 < s.verts.size(); ++i) {
                    const double ax = cx + s.verts[i].first * sz, ay = cy + s.verts[i].second * sz;
                    const double bx = cx + s.verts[i + 1].first * sz, by = cy + s.verts[i + 1].second * sz;
                    if (point_segment_dist2(x, y, ax, ay, bx, by) <= r2) {
                        put(y, x);
                        break;
                    }
                }
            }
        break;
    }
    }
}

} // namespace

Sequence synth_sequence(std::uint64_t seed, const SynthOpts& opts) {
    if (opts.n_frames < 8) throw std::invalid_argument("synth_sequence: n_frames must be >= 8");
    if (opts.size < 32) throw std::invalid_argument("synth_sequence: size must be >= 32");
    Rng rng(splitmix64(seed ^ 0x5eedc0de12345678ULL));
    const int S = opts.size;

    // Background: desaturated bright color from the palette family.
    double bg_r, bg_g, bg_b;
    hsv_to_rgb(rng.uniform(opts.hue_min, opts.hue_max), rng.uniform(0.05, 0.2), rng.uniform(0.8, 0.95),
               bg_r, bg_g, bg_b);

    const int n_shapes = static_cast<int>(rng.uniform_int(2, 5));
    std::vector<Shape> shapes;
    for (int i = 0; i < n_shapes; ++i) {
        Shape s;
        const auto kind_roll = rng.uniform_int(0, 2);
        s.kind = kind_roll == 0 ? Shape::Disk : (kind_roll == 1 ? Shape::Rect : Shape::Polyline);
        const double margin = 0.2 * S;
        s.x0 = rng.uniform(margin, S - margin);
        s.y0 = rng.uniform(margin, S - margin);
        s.x1 = s.x0 + opts.motion * rng.uniform(-0.15, 0.15) * S;
        s.y1 = s.y0 + opts.motion * rng.uniform(-0.15, 0.15) * S;
        s.x1 = std::clamp(s.x1, margin, static_cast<double>(S) - margin);
        s.y1 = std::clamp(s.y1, margin, static_cast<double>(S) - margin);
        s.size0 = rng.uniform(0.08, 0.18) * S;
        s.size1 = s.size0 * (1.0 + opts.motion * rng.uniform(-0.25, 0.25));
        s.aspect = rng.uniform(0.5, 1.5);
        hsv_to_rgb(rng.uniform(opts.hue_min, opts.hue_max), rng.uniform(opts.sat_min, opts.sat_max),
                   rng.uniform(opts.val_min, opts.val_max), s.r, s.g, s.b);
        if (s.kind == Shape::Polyline) {
            const int nv = static_cast<int>(rng.uniform_int(2, 4));
            for (int v = 0; v < nv; ++v) s.verts.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            s.stroke = rng.uniform(1.2, 2.2);
        }
        shapes.push_back(std::move(s));
    }

    Sequence seq;
    seq.source_id = "synth_" + std::to_string(seed);
    for (int f = 0; f < opts.n_frames; ++f) {
        const double t01 = opts.n_frames > 1 ? static_cast<double>(f) / (opts.n_frames - 1) : 0.0;
        Frame frame;
        frame.color = Image(S, S, 3);
        for (int y = 0; y < S; ++y)
            for (int x = 0; x < S; ++x) {
                frame.color.at(y, x, 0) = static_cast<float>(bg_r);
                frame.color.at(y, x, 1) = static_cast<float>(bg_g);
                frame.color.at(y, x, 2) = static_cast<float>(bg_b);
            }
        for (const auto& s : shapes) paint(frame.color, s, opts.motion == 0.0 ? 0.0 : t01);
        frame.line = edges_from_color(frame.color);
        frame.dist = distance_field(frame.line);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

} // namespace refcolor::data
