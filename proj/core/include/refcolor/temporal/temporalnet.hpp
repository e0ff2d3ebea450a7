#pragma once

#include <array>
#include <vector>

#include "refcolor/net/layers.hpp"

namespace refcolor::temporal {

// Gated temporal shift: the first quarter of the channels shifts forward in
// time, the second quarter backward (zero padded), gated per position by a
// sigmoid 1x1x1 convolution of the input.
// v: [N, C, T, H, W], C divisible by 4.
Tensor temporal_shift(const Tensor& v, const net::Conv3dLayer& gate_conv);

// Shift + per-frame 2-D spatial convolutions for feature and gate; the gate
// multiplies the feature map (the 2-D realization of gated 3-D convolution).
// A per-channel output gain (init 2, the inverse of the expected gate value)
// keeps signal variance near unity under spectral-normalized kernels.
struct GatedConv3d {
    net::Conv3dLayer shift_gate; // 1x1x1, C -> 1
    net::Conv2dLayer feature;
    net::Conv2dLayer gate;
    Parameter* gain = nullptr; // [out_ch]
    Tensor operator()(const Tensor& v) const;
    // Ungated feature path (gain applied), used by tests to verify saturation.
    Tensor raw(const Tensor& v, bool gated) const;
};

struct TemporalNetConfig {
    std::vector<int> enc_channels{32, 64, 128};  // strides 1,2,2
    std::vector<int> dilations{2, 4, 8, 16};     // spatial dilations, stride 1
    std::vector<int> dec_channels{64, 32};       // two upsampling stages, then the RGB head
    std::vector<int> disc_channels{32, 64, 64, 128}; // + final 1-channel conv
    DType dt = DType::F32;
    PadMode pad_mode = PadMode::Zero;

    static TemporalNetConfig tiny(DType dt);
};

class TemporalModel {
  public:
    TemporalModel(const TemporalNetConfig& cfg, Rng& rng);

    const TemporalNetConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::vector<Parameter*> generator_params();
    std::vector<Parameter*> discriminator_params();

    // lines: [N, 1, T, H, W]; colors_in: [N, 3, T, H, W], chronological with
    // references at both ends. Returns refined colors [N, 3, T, H, W] in [0,1].
    Tensor refine_sequence(const Tensor& lines, const Tensor& colors_in) const;

    // Spatiotemporal patch logits from five strided 3-D convolutions.
    Tensor patch_discriminate(const Tensor& lines, const Tensor& colors) const;

    std::vector<GatedConv3d>& enc_layers() { return enc_; }
    std::vector<GatedConv3d>& dec_layers() { return dec_; }

  private:
    TemporalNetConfig cfg_;
    ParamStore params_;
    std::vector<GatedConv3d> enc_;      // 3 layers, strides 1,2,2
    std::vector<GatedConv3d> dilated_;  // 4 dilated layers
    std::vector<GatedConv3d> dec_;      // up+gconv, up+gconv, gconv head
    std::array<net::Conv3dLayer, 5> disc_;
};

} // namespace refcolor::temporal
