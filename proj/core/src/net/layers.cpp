#include "refcolor/net/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace refcolor::net {

namespace {

Tensor he_normal(std::vector<std::int64_t> shape, std::int64_t fan_in, Rng& rng, DType dt) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    return Tensor::randn(std::move(shape), rng, dt, stddev);
}

} // namespace

Tensor Conv2dLayer::operator()(const Tensor& x) const {
    Tensor kernel = w->spectral ? spectral_normalize(*w, 1) : w->tensor;
    return conv2d(x, kernel, b ? std::optional<Tensor>(b->tensor) : std::nullopt, opts);
}

Conv2dLayer conv2d_layer(ParamStore& store, const std::string& name, int in_ch, int out_ch, int k,
                         int stride, int pad, Rng& rng, DType dt, bool spectral, PadMode pad_mode,
                         int dilation) {
    Conv2dLayer layer;
    const std::int64_t fan_in = static_cast<std::int64_t>(in_ch) * k * k;
    layer.w = &store.add(name + ".weight", he_normal({out_ch, in_ch, k, k}, fan_in, rng, dt), spectral, &rng);
    layer.b = &store.add(name + ".bias", Tensor::zeros({out_ch}, dt));
    layer.opts.stride = stride;
    layer.opts.padding = pad;
    layer.opts.dilation = dilation;
    layer.opts.pad_mode = pad_mode;
    return layer;
}

Tensor Conv3dLayer::operator()(const Tensor& x) const {
    Tensor kernel = w->spectral ? spectral_normalize(*w, 1) : w->tensor;
    return conv3d(x, kernel, b ? std::optional<Tensor>(b->tensor) : std::nullopt, opts);
}

Conv3dLayer conv3d_layer(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kt, int kh,
                         int kw, int stride_t, int stride_hw, int pad_t, int pad_hw, Rng& rng, DType dt,
                         bool spectral) {
    Conv3dLayer layer;
    const std::int64_t fan_in = static_cast<std::int64_t>(in_ch) * kt * kh * kw;
    layer.w = &store.add(name + ".weight", he_normal({out_ch, in_ch, kt, kh, kw}, fan_in, rng, dt), spectral,
                         &rng);
    layer.b = &store.add(name + ".bias", Tensor::zeros({out_ch}, dt));
    layer.opts.stride_t = stride_t;
    layer.opts.stride_h = stride_hw;
    layer.opts.stride_w = stride_hw;
    layer.opts.pad_t = pad_t;
    layer.opts.pad_h = pad_hw;
    layer.opts.pad_w = pad_hw;
    return layer;
}

Tensor LinearLayer::operator()(const Tensor& x) const {
    Tensor y = matmul(x, w->tensor);
    return add(y, reshape(b->tensor, {1, b->tensor.shape()[0]}));
}

LinearLayer linear_layer(ParamStore& store, const std::string& name, int in_dim, int out_dim, Rng& rng,
                         DType dt) {
    LinearLayer layer;
    layer.w = &store.add(name + ".weight", he_normal({in_dim, out_dim}, in_dim, rng, dt));
    layer.b = &store.add(name + ".bias", Tensor::zeros({out_dim}, dt));
    return layer;
}

Tensor tensor_from_images(const std::vector<const data::Image*>& images, DType dt) {
    if (images.empty()) throw std::invalid_argument("tensor_from_images: empty list");
    const int H = images[0]->h, W = images[0]->w, C = images[0]->c;
    const std::int64_t N = static_cast<std::int64_t>(images.size());
    Tensor t = Tensor::zeros({N, C, H, W}, dt);
    dispatch_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        for (std::int64_t n = 0; n < N; ++n) {
            const auto& img = *images[static_cast<std::size_t>(n)];
            if (img.h != H || img.w != W || img.c != C)
                throw std::invalid_argument("tensor_from_images: mismatched image sizes");
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        d[((n * C + c) * H + y) * W + x] = static_cast<T>(img.at(y, x, c));
        }
    });
    return t;
}

Tensor tensor_from_image(const data::Image& img, DType dt) { return tensor_from_images({&img}, dt); }

data::Image image_from_tensor(const Tensor& t, std::int64_t n) {
    if (t.ndim() != 4) throw std::invalid_argument("image_from_tensor: expects [N,C,H,W]");
    const std::int64_t C = t.shape()[1], H = t.shape()[2], W = t.shape()[3];
    data::Image img(static_cast<int>(H), static_cast<int>(W), static_cast<int>(C));
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x)
                img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(c)) =
                    static_cast<float>(t.value_at(((n * C + c) * H + y) * W + x));
    return img;
}

} // namespace refcolor::net
