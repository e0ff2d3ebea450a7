#pragma once

#include <optional>
#include <vector>

#include "refcolor/engine/tensor.hpp"

namespace refcolor {

enum class PadMode { Zero, Circular };

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// y = scale * x + shift
Tensor affine(const Tensor& x, double scale, double shift);
Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.2);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor abs_op(const Tensor& x);
Tensor square(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---- shape ----
Tensor reshape(const Tensor& x, std::vector<std::int64_t> new_shape);
Tensor permute(const Tensor& x, std::vector<int> perm);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor upsample_nearest(const Tensor& x, int factor); // replicates over the last two axes
Tensor avg_pool2d(const Tensor& x, int window);       // non-overlapping mean over the last two axes

// ---- reductions ----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mean_axes(const Tensor& x, std::vector<int> axes, bool keepdim = false);
Tensor sum_axes(const Tensor& x, std::vector<int> axes, bool keepdim = false);

// ---- linear algebra ----
// a: [M,K] x b: [K,N], or batched [B,M,K] x [B,K,N].
Tensor matmul(const Tensor& a, const Tensor& b);

// ---- nn ----
Tensor softmax(const Tensor& x, int axis);

struct Conv2dOpts {
    int stride = 1;
    int padding = 0;
    int dilation = 1;
    PadMode pad_mode = PadMode::Zero;
};
// input [N,C,H,W], kernel [F,C,kh,kw], optional bias [F]; cross-correlation.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias, const Conv2dOpts& opts);

struct Conv3dOpts {
    int stride_t = 1, stride_h = 1, stride_w = 1;
    int pad_t = 0, pad_h = 0, pad_w = 0;
};
// input [N,C,T,H,W], kernel [F,C,kt,kh,kw], optional bias [F]; zero padding.
Tensor conv3d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias, const Conv3dOpts& opts);

// Per-(sample, channel) normalization over the trailing spatial axes of a
// 4-D tensor to zero mean and unit variance.
Tensor instance_norm(const Tensor& x, double eps = 1e-5);

// gamma/beta of shape [C] or [N,C]; out = gamma * instance_norm(x) + beta.
Tensor adain(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

} // namespace refcolor
