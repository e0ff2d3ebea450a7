#pragma once

#include <string>
#include <vector>

#include "refcolor/data/image.hpp"
#include "refcolor/engine/ops.hpp"
#include "refcolor/engine/param.hpp"

namespace refcolor::net {

// Convolution layer owning named parameters in a ParamStore; applies spectral
// normalization to the kernel when constructed with spectral = true.
struct Conv2dLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    Conv2dOpts opts;
    Tensor operator()(const Tensor& x) const;
};

Conv2dLayer conv2d_layer(ParamStore& store, const std::string& name, int in_ch, int out_ch, int k,
                         int stride, int pad, Rng& rng, DType dt, bool spectral,
                         PadMode pad_mode = PadMode::Zero, int dilation = 1);

struct Conv3dLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    Conv3dOpts opts;
    Tensor operator()(const Tensor& x) const;
};

Conv3dLayer conv3d_layer(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kt, int kh,
                         int kw, int stride_t, int stride_hw, int pad_t, int pad_hw, Rng& rng, DType dt,
                         bool spectral);

// x: [N, in] -> [N, out]
struct LinearLayer {
    Parameter* w = nullptr; // [in, out]
    Parameter* b = nullptr; // [out]
    Tensor operator()(const Tensor& x) const;
};

LinearLayer linear_layer(ParamStore& store, const std::string& name, int in_dim, int out_dim, Rng& rng,
                         DType dt);

// ---- image <-> tensor ----

// Stacks images (all same H, W, C) into an [N, C, H, W] tensor.
Tensor tensor_from_images(const std::vector<const data::Image*>& images, DType dt);
Tensor tensor_from_image(const data::Image& img, DType dt);
// Extracts sample n of an [N, C, H, W] tensor as an H x W x C image.
data::Image image_from_tensor(const Tensor& t, std::int64_t n = 0);

} // namespace refcolor::net
