#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refcolor/engine/dtype.hpp"
#include "refcolor/loss/losses.hpp"

namespace refcolor::train {

struct TrainConfig {
    double lr_g = 1e-4;
    double lr_d = 1e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int batch = 4;
    int epochs_color = 40;
    int epochs_temporal = 10;
    int epochs_finetune = 30;
    // When positive, overrides the epoch-derived step counts.
    int steps_color = 0;
    int steps_temporal = 0;
    int steps_finetune = 0;
    std::uint64_t seed = 1;
    int image_size = 256;
    std::string precision = "f32"; // f32 | f64
    loss::LossWeights weights;
    bool gram_normalize = true;
    bool finetune_temporal = true;
    double grad_clip = 0.0; // 0 disables clipping

    // Architecture scale.
    std::vector<int> enc_channels{64, 128, 256};
    std::vector<int> embed_channels{64, 128, 256, 256, 256};
    std::vector<int> disc_channels{64, 128, 256, 512};
    std::vector<int> temporal_enc_channels{32, 64, 128};
    std::vector<int> temporal_dec_channels{64, 32};
    std::vector<int> temporal_disc_channels{32, 64, 64, 128};
    std::vector<int> pyramid_channels{16, 32, 64, 128, 256};
    std::string pyramid_weights; // optional external weights file

    // Data preparation knobs.
    double shot_cut_threshold = 200.0;
    double shot_uniform_threshold = 10.0;
    int shot_min_length = 8;
    double shot_min_luminance = 0.1;
    double shot_min_channel_std = 0.02;
    bool histogram_normalize = false;

    std::string dataset; // manifest path

    DType dtype() const { return dtype_from_name(precision); }

    void validate() const;
    std::string serialize() const; // key=value lines
    static TrainConfig parse(const std::string& text);
    static TrainConfig load_file(const std::string& path);
    void apply_override(const std::string& key, const std::string& value);
};

} // namespace refcolor::train
