#include <stdexcept>

#include "refcolor/temporal/temporalnet.hpp"

namespace refcolor::temporal {

TemporalNetConfig TemporalNetConfig::tiny(DType dt) {
    TemporalNetConfig cfg;
    cfg.enc_channels = {8, 16, 32};
    cfg.dec_channels = {16, 8};
    cfg.disc_channels = {8, 16, 16, 16};
    cfg.dt = dt;
    return cfg;
}

Tensor temporal_shift(const Tensor& v, const net::Conv3dLayer& gate_conv) {
    if (v.ndim() != 5) throw std::invalid_argument("temporal_shift: expects [N,C,T,H,W]");
    const std::int64_t C = v.shape()[1], T = v.shape()[2];
    if (C % 4 != 0)
        throw std::invalid_argument("temporal_shift: channels must be divisible by 4, got " +
                                    std::to_string(C));
    const std::int64_t q = C / 4;

    Tensor fwd_group = slice(v, 1, 0, q);
    Tensor bwd_group = slice(v, 1, q, q);
    Tensor rest = slice(v, 1, 2 * q, C - 2 * q);

    auto zero_frame = [&](const Tensor& g) {
        auto shape = g.shape();
        shape[2] = 1;
        return Tensor::zeros(shape, g.dtype());
    };
    // Forward in time: frame t receives frame t-1; zero padded at the start.
    Tensor fwd_shifted = T > 1 ? concat({zero_frame(fwd_group), slice(fwd_group, 2, 0, T - 1)}, 2)
                               : zero_frame(fwd_group);
    // Backward in time: frame t receives frame t+1; zero padded at the end.
    Tensor bwd_shifted = T > 1 ? concat({slice(bwd_group, 2, 1, T - 1), zero_frame(bwd_group)}, 2)
                               : zero_frame(bwd_group);
    Tensor shifted = concat({fwd_shifted, bwd_shifted, rest}, 1);

    Tensor g = sigmoid(gate_conv(v)); // [N, 1, T, H, W], broadcast over channels
    return add(mul(g, shifted), mul(affine(g, -1.0, 1.0), v));
}

namespace {

// Folds time into the batch axis, applies f per frame, unfolds back.
template <class F>
Tensor per_frame(const Tensor& v, F&& f) {
    const std::int64_t N = v.shape()[0], C = v.shape()[1], T = v.shape()[2], H = v.shape()[3],
                       W = v.shape()[4];
    Tensor folded = reshape(permute(v, {0, 2, 1, 3, 4}), {N * T, C, H, W});
    Tensor out = f(folded);
    const std::int64_t F_ = out.shape()[1], OH = out.shape()[2], OW = out.shape()[3];
    return permute(reshape(out, {N, T, F_, OH, OW}), {0, 2, 1, 3, 4});
}

} // namespace

Tensor GatedConv3d::raw(const Tensor& v, bool gated) const {
    Tensor s = temporal_shift(v, shift_gate);
    const std::int64_t F_ = feature.w->tensor.shape()[0];
    Tensor g5 = reshape(gain->tensor, {1, F_, 1, 1, 1});
    Tensor feat = per_frame(s, [&](const Tensor& x) { return feature(x); });
    if (!gated) return mul(feat, g5);
    Tensor g = per_frame(s, [&](const Tensor& x) { return sigmoid(gate(x)); });
    return mul(mul(feat, g), g5);
}

Tensor GatedConv3d::operator()(const Tensor& v) const { return raw(v, true); }

TemporalModel::TemporalModel(const TemporalNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.enc_channels.size() != 3 || cfg.dilations.size() != 4 || cfg.dec_channels.size() != 2 ||
        cfg.disc_channels.size() != 4)
        throw std::invalid_argument("TemporalModel: config needs 3 encoder, 4 dilation, 2 decoder and "
                                    "4 discriminator entries");
    const DType dt = cfg.dt;

    auto gated = [&](const std::string& name, int in_ch, int out_ch, int stride, int dilation) {
        GatedConv3d layer;
        layer.shift_gate = net::conv3d_layer(params_, name + ".shift_gate", in_ch, 1, 1, 1, 1, 1, 1, 0, 0,
                                             rng, dt, /*spectral=*/false);
        const int pad = dilation; // k = 3
        layer.feature = net::conv2d_layer(params_, name + ".feature", in_ch, out_ch, 3, stride, pad, rng,
                                          dt, /*spectral=*/false, cfg.pad_mode, dilation);
        layer.gate = net::conv2d_layer(params_, name + ".gate", in_ch, out_ch, 3, stride, pad, rng, dt,
                                       /*spectral=*/false, cfg.pad_mode, dilation);
        layer.gain = &params_.add(name + ".gain", Tensor::full({out_ch}, 2.0, dt));
        return layer;
    };

    int in_ch = 4;
    const int enc_strides[3] = {1, 2, 2};
    for (int i = 0; i < 3; ++i) {
        enc_.push_back(gated("g.enc" + std::to_string(i + 1), in_ch,
                             cfg.enc_channels[static_cast<std::size_t>(i)], enc_strides[i], 1));
        in_ch = cfg.enc_channels[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < 4; ++i)
        dilated_.push_back(gated("g.dil" + std::to_string(i + 1), in_ch, in_ch, 1,
                                 cfg.dilations[static_cast<std::size_t>(i)]));
    dec_.push_back(gated("g.dec1", in_ch, cfg.dec_channels[0], 1, 1));
    dec_.push_back(gated("g.dec2", cfg.dec_channels[0], cfg.dec_channels[1], 1, 1));
    dec_.push_back(gated("g.dec3", cfg.dec_channels[1], 3, 1, 1)); // RGB head

    int dch = 4;
    for (int i = 0; i < 4; ++i) {
        disc_[static_cast<std::size_t>(i)] =
            net::conv3d_layer(params_, "d.conv" + std::to_string(i + 1), dch,
                              cfg.disc_channels[static_cast<std::size_t>(i)], 3, 3, 3, 1, 2, 1, 1, rng, dt,
                              /*spectral=*/true);
        dch = cfg.disc_channels[static_cast<std::size_t>(i)];
    }
    disc_[4] = net::conv3d_layer(params_, "d.conv5", dch, 1, 3, 3, 3, 1, 1, 1, 1, rng, dt,
                                 /*spectral=*/false);
}

std::vector<Parameter*> TemporalModel::generator_params() {
    std::vector<Parameter*> out;
    for (auto* p : params_.all())
        if (p->name.rfind("g.", 0) == 0) out.push_back(p);
    return out;
}

std::vector<Parameter*> TemporalModel::discriminator_params() {
    std::vector<Parameter*> out;
    for (auto* p : params_.all())
        if (p->name.rfind("d.", 0) == 0) out.push_back(p);
    return out;
}

Tensor TemporalModel::refine_sequence(const Tensor& lines, const Tensor& colors_in) const {
    if (lines.ndim() != 5 || colors_in.ndim() != 5 || lines.shape()[1] != 1 || colors_in.shape()[1] != 3)
        throw std::invalid_argument("refine_sequence: expects lines [N,1,T,H,W] and colors [N,3,T,H,W]");
    if (lines.shape()[2] != colors_in.shape()[2] || lines.shape()[3] != colors_in.shape()[3] ||
        lines.shape()[4] != colors_in.shape()[4])
        throw std::invalid_argument("refine_sequence: line/color volume mismatch");
    if (lines.shape()[2] < 3)
        throw std::invalid_argument("refine_sequence: needs at least 3 frames (two references plus one "
                                    "target), got " + std::to_string(lines.shape()[2]));
    if (lines.shape()[3] % 4 != 0 || lines.shape()[4] % 4 != 0)
        throw std::invalid_argument("refine_sequence: spatial extents must be divisible by 4");

    Tensor h = concat({lines, colors_in}, 1);
    for (const auto& layer : enc_) h = leaky_relu(layer(h), 0.2);
    for (const auto& layer : dilated_) h = leaky_relu(layer(h), 0.2);
    h = leaky_relu(dec_[0](upsample_nearest(h, 2)), 0.2);
    h = leaky_relu(dec_[1](upsample_nearest(h, 2)), 0.2);
    Tensor head = dec_[2].raw(h, true);
    return affine(tanh_op(head), 0.5, 0.5);
}

Tensor TemporalModel::patch_discriminate(const Tensor& lines, const Tensor& colors) const {
    if (lines.ndim() != 5 || colors.ndim() != 5)
        throw std::invalid_argument("patch_discriminate: expects 5-D volumes");
    Tensor h = concat({lines, colors}, 1);
    for (std::size_t i = 0; i + 1 < disc_.size(); ++i) h = leaky_relu(disc_[i](h), 0.2);
    return disc_.back()(h);
}

} // namespace refcolor::temporal
