#pragma once

#include <string>
#include <vector>

#include "refcolor/engine/ops.hpp"

namespace refcolor::loss {

// Fixed 5-level feature extractor at strides 1, 2, 4, 8, 16. Weights are
// seeded and never trained; gradients still flow through to the input image.
// An externally supplied weights file can replace the seeded weights.
class FeaturePyramid {
  public:
    FeaturePyramid(std::uint64_t seed, DType dt, std::vector<int> channels = {16, 32, 64, 128, 256});

    // image: [N, 3, H, W], H and W divisible by 16. Returns 5 levels.
    std::vector<Tensor> levels(const Tensor& image) const;

    const std::vector<int>& channels() const { return channels_; }
    DType dtype() const { return dt_; }

    void save_weights(const std::string& path) const;
    void load_weights(const std::string& path);

  private:
    DType dt_;
    std::vector<int> channels_;
    std::vector<Tensor> kernels_; // [C_i, C_{i-1}, 3, 3]
    std::vector<Tensor> biases_;
};

struct LossWeights {
    double perc = 1.0;
    double style = 1000.0;
    double latent = 1.0;
    double gan = 1.0;
    double l1 = 10.0;
};

struct LossParts {
    Tensor perc;
    Tensor style;
    Tensor latent; // may be undefined (temporal stage)
    Tensor gan;
    Tensor l1;
};

// Mean absolute difference; shapes must match.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Sum over levels of (1/N_i) * ||phi_i(pred) - phi_i(target)||_2^2, averaged
// over the batch. N_i is the per-sample element count of level i.
Tensor perceptual_loss(const FeaturePyramid& pyr, const Tensor& pred, const Tensor& target);

// Gram matrix of one pyramid level: [N, C, C] from [N, C, H, W]; divides by
// C * (C*H*W) when normalize is set.
Tensor gram_matrix(const Tensor& level, bool normalize = true);

// Sum over levels of ||G(phi_i(pred)) - G(phi_i(target))||_1, batch-averaged.
Tensor style_loss(const FeaturePyramid& pyr, const Tensor& pred, const Tensor& target, bool normalize = true);

// ||y - y_sim||_1 + ||y - y_mid||_1 (means).
Tensor latent_loss(const Tensor& y_sim, const Tensor& y_mid, const Tensor& target);

struct GanLosses {
    Tensor d; // -E[log s(real)] - E[log(1 - s(fake))]
    Tensor g; // -E[log s(fake)], non-saturating
};

// Logit inputs of any matching shape; means are over all elements.
GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake);

Tensor total_loss(const LossParts& parts, const LossWeights& w);

} // namespace refcolor::loss
