#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "refcolor/loss/losses.hpp"

namespace refcolor::loss {

namespace {
constexpr char kMagic[8] = {'R', 'C', 'P', 'Y', 'R', 'W', 'T', '1'};
}

FeaturePyramid::FeaturePyramid(std::uint64_t seed, DType dt, std::vector<int> channels)
    : dt_(dt), channels_(std::move(channels)) {
    if (channels_.size() != 5) throw std::invalid_argument("FeaturePyramid: needs exactly 5 channel counts");
    Rng rng(splitmix64(seed ^ 0xfeedfacecafebeefULL));
    int in_ch = 3;
    for (int i = 0; i < 5; ++i) {
        const int out_ch = channels_[static_cast<std::size_t>(i)];
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * 9.0));
        kernels_.push_back(Tensor::randn({out_ch, in_ch, 3, 3}, rng, dt, stddev));
        biases_.push_back(Tensor::zeros({out_ch}, dt));
        in_ch = out_ch;
    }
}

std::vector<Tensor> FeaturePyramid::levels(const Tensor& image) const {
    if (image.ndim() != 4 || image.shape()[1] != 3)
        throw std::invalid_argument("FeaturePyramid: expects [N,3,H,W], got " + shape_str(image.shape()));
    if (image.shape()[2] % 16 != 0 || image.shape()[3] % 16 != 0)
        throw std::invalid_argument("FeaturePyramid: spatial extents must be divisible by 16");
    std::vector<Tensor> out;
    Tensor h = image;
    Conv2dOpts copts;
    copts.padding = 1;
    for (int i = 0; i < 5; ++i) {
        h = relu(conv2d(h, kernels_[static_cast<std::size_t>(i)], biases_[static_cast<std::size_t>(i)], copts));
        out.push_back(h);
        if (i < 4) h = avg_pool2d(h, 2);
    }
    return out;
}

void FeaturePyramid::save_weights(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("FeaturePyramid: cannot write " + path);
    os.write(kMagic, 8);
    const std::uint32_t version = 1;
    os.write(reinterpret_cast<const char*>(&version), 4);
    for (int c : channels_) {
        const std::uint32_t v = static_cast<std::uint32_t>(c);
        os.write(reinterpret_cast<const char*>(&v), 4);
    }
    for (int i = 0; i < 5; ++i) {
        for (const Tensor* t : {&kernels_[static_cast<std::size_t>(i)], &biases_[static_cast<std::size_t>(i)]}) {
            auto vals = t->to_vector();
            for (double v : vals) {
                const float f = static_cast<float>(v);
                os.write(reinterpret_cast<const char*>(&f), 4);
            }
        }
    }
}

void FeaturePyramid::load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("FeaturePyramid: cannot read " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("FeaturePyramid: bad magic in " + path);
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) throw std::runtime_error("FeaturePyramid: unsupported version in " + path);
    for (int i = 0; i < 5; ++i) {
        std::uint32_t c = 0;
        is.read(reinterpret_cast<char*>(&c), 4);
        if (!is || static_cast<int>(c) != channels_[static_cast<std::size_t>(i)])
            throw std::runtime_error("FeaturePyramid: layer size mismatch in " + path);
    }
    for (int i = 0; i < 5; ++i) {
        for (Tensor* t : {&kernels_[static_cast<std::size_t>(i)], &biases_[static_cast<std::size_t>(i)]}) {
            std::vector<double> vals(static_cast<std::size_t>(t->numel()));
            for (auto& v : vals) {
                float f = 0.0f;
                is.read(reinterpret_cast<char*>(&f), 4);
                v = static_cast<double>(f);
            }
            if (!is) throw std::runtime_error("FeaturePyramid: truncated weights file " + path);
            *t = Tensor::from_data(t->shape(), std::span<const double>(vals), dt_);
        }
    }
}

} // namespace refcolor::loss
