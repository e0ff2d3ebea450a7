#include <stdexcept>

#include "refcolor/loss/losses.hpp"

namespace refcolor::loss {

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("l1_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    return mean_all(abs_op(sub(pred, target)));
}

Tensor perceptual_loss(const FeaturePyramid& pyr, const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("perceptual_loss: shape mismatch");
    const auto lp = pyr.levels(pred);
    const auto lt = pyr.levels(target);
    const double batch = static_cast<double>(pred.shape()[0]);
    Tensor acc;
    for (std::size_t i = 0; i < lp.size(); ++i) {
        const double n_i = static_cast<double>(lp[i].numel()) / batch; // per-sample element count
        Tensor term = affine(sum_all(square(sub(lp[i], lt[i]))), 1.0 / (n_i * batch), 0.0);
        acc = acc.defined() ? add(acc, term) : term;
    }
    return acc;
}

Tensor gram_matrix(const Tensor& level, bool normalize) {
    if (level.ndim() != 4) throw std::invalid_argument("gram_matrix: expects [N,C,H,W]");
    const std::int64_t N = level.shape()[0], C = level.shape()[1], H = level.shape()[2], W = level.shape()[3];
    Tensor flat = reshape(level, {N, C, H * W});
    Tensor g = matmul(flat, permute(flat, {0, 2, 1})); // [N, C, C]
    if (normalize) {
        const double n_i = static_cast<double>(C) * H * W;
        g = affine(g, 1.0 / (static_cast<double>(C) * n_i), 0.0);
    }
    return g;
}

Tensor style_loss(const FeaturePyramid& pyr, const Tensor& pred, const Tensor& target, bool normalize) {
    if (pred.shape() != target.shape())
        throw std::invalid_argument("style_loss: shape mismatch");
    const auto lp = pyr.levels(pred);
    const auto lt = pyr.levels(target);
    const double batch = static_cast<double>(pred.shape()[0]);
    Tensor acc;
    for (std::size_t i = 0; i < lp.size(); ++i) {
        Tensor diff = sub(gram_matrix(lp[i], normalize), gram_matrix(lt[i], normalize));
        Tensor term = affine(sum_all(abs_op(diff)), 1.0 / batch, 0.0);
        acc = acc.defined() ? add(acc, term) : term;
    }
    return acc;
}

Tensor latent_loss(const Tensor& y_sim, const Tensor& y_mid, const Tensor& target) {
    return add(l1_loss(y_sim, target), l1_loss(y_mid, target));
}

GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake) {
    // -log s(z) = softplus(-z); -log(1 - s(z)) = softplus(z).
    GanLosses out;
    out.d = add(mean_all(softplus(neg(d_real))), mean_all(softplus(d_fake)));
    out.g = mean_all(softplus(neg(d_fake)));
    return out;
}

Tensor total_loss(const LossParts& parts, const LossWeights& w) {
    Tensor acc = affine(parts.perc, w.perc, 0.0);
    acc = add(acc, affine(parts.style, w.style, 0.0));
    if (parts.latent.defined()) acc = add(acc, affine(parts.latent, w.latent, 0.0));
    acc = add(acc, affine(parts.gan, w.gan, 0.0));
    acc = add(acc, affine(parts.l1, w.l1, 0.0));
    return acc;
}

} // namespace refcolor::loss
