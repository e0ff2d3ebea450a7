#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "refcolor/data/image.hpp"
#include "refcolor/engine/rng.hpp"

namespace refcolor::data {

// ---- png ----
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

// ---- distance field ----

// Exact Euclidean distance to the nearest line pixel (value < 0.5), computed
// by the two-pass lower-envelope squared-distance transform, normalized by
// the image diagonal and clamped to [0,1]. All-background input maps to 1.
Image distance_field(const Image& line);

// ---- line extraction ----

// Binary line art from a color image: a pixel is an edge when the max channel
// difference to any 4-neighbor exceeds `threshold`; the edge mask is dilated
// 3x3 and inverted so ink = 0, background = 1.
Image edges_from_color(const Image& color, double threshold = 0.15);

// ---- histogram features and shot splitting ----

// 768-vector of raw per-channel 256-bin counts (R, G, B order), bins
// floor(v * 255).
std::vector<double> histogram_feature(const Image& color);

struct ShotSplitOpts {
    double cut_threshold = 200.0;     // MSE above this cuts between frames
    double uniform_threshold = 10.0;  // drop shots with all pairwise MSE below
    int min_length = 8;
    double min_luminance = 0.1;       // drop too-dark shots
    double min_channel_std = 0.02;    // drop too-faded shots
    bool normalize_histograms = false; // divide counts by pixel count before MSE
};

// Feature MSE between two frames under the options (counts rescaled to the
// reference 256x256 frame area unless normalized).
double histogram_mse(const std::vector<double>& fa, const std::vector<double>& fb, int h, int w,
                     const ShotSplitOpts& opts);

// Splits color frames into shots by histogram-feature discontinuities, then
// filters uniform, short, dark, and faded shots.
std::vector<std::vector<Image>> split_shots(const std::vector<Image>& frames, const ShotSplitOpts& opts = {});

// ---- window sampling ----

struct Window {
    ReferenceSet refs;          // frames 0 and 7 of the window
    std::vector<Frame> targets; // frames 1..6
    std::size_t start = 0;
};

// Uniformly random 8-frame window; references are the window extremes.
Window sample_window(const Sequence& seq, Rng& rng);

// ---- synthetic animation ----

struct SynthOpts {
    int n_frames = 12;
    int size = 64;
    double motion = 1.0;       // 0 freezes all shapes
    double hue_min = 0.0;      // palette hue range (turns)
    double hue_max = 1.0;
    double sat_min = 0.55;
    double sat_max = 0.95;
    double val_min = 0.55;
    double val_max = 0.95;
};

// Deterministic-by-seed animation of 2-5 filled primitives with per-shape
// palette colors moving smoothly across frames; line art and distance fields
// are derived per frame.
Sequence synth_sequence(std::uint64_t seed, const SynthOpts& opts = {});

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

} // namespace refcolor::data
