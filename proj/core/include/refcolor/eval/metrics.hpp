#pragma once

#include <vector>

#include "refcolor/data/image.hpp"

namespace refcolor::eval {

// Mean squared error over all pixels and channels, in double precision.
double mse(const data::Image& a, const data::Image& b);

// -10 log10(MSE), capped at 100 dB for identical images.
double psnr(const data::Image& a, const data::Image& b);
constexpr double kPsnrCap = 100.0;

// Structural similarity on channel-mean grayscale with an 11x11 Gaussian
// window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1; mean over the valid region.
double ssim(const data::Image& a, const data::Image& b);

// Frechet distance between Gaussian fits of two feature sets (rows are
// feature vectors). Covariances use the n-1 convention with 1e-6 diagonal
// loading; the matrix square root comes from a symmetric eigendecomposition
// with eigenvalues floored at zero.
double frechet_from_features(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b);

// Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
// Eigenvectors are returned as columns of `vectors`.
void eigen_symmetric(std::vector<double> matrix, int n, std::vector<double>& values,
                     std::vector<double>& vectors);

} // namespace refcolor::eval
