#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "refcolor/engine/tensor.hpp"

#ifdef REFCOLOR_HAVE_EIGEN
#include <Eigen/Core>
#endif

namespace refcolor::detail {

inline void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw std::invalid_argument(std::string(op) + ": mixed dtypes " + dtype_name(a.dtype()) + " vs " +
                                    dtype_name(b.dtype()));
}

inline std::vector<std::int64_t> strides_of(const std::vector<std::int64_t>& shape) {
    std::vector<std::int64_t> s(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * shape[i + 1];
    return s;
}

// C[m,n] (+)= A[m,k] * B[k,n], row-major dense, optional accumulate.
template <class T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c, bool accumulate) {
#ifdef REFCOLOR_HAVE_EIGEN
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> A(a, m, k), B(b, k, n);
    Eigen::Map<Mat> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
#else
    if (!accumulate)
        for (std::int64_t i = 0; i < m * n; ++i) c[i] = T(0);
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
#endif
}

// C[m,n] (+)= A[k,m]^T * B[k,n]
template <class T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c, bool accumulate) {
#ifdef REFCOLOR_HAVE_EIGEN
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> A(a, k, m), B(b, k, n);
    Eigen::Map<Mat> C(c, m, n);
    if (accumulate)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
#else
    if (!accumulate)
        for (std::int64_t i = 0; i < m * n; ++i) c[i] = T(0);
    for (std::int64_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::int64_t i = 0; i < m; ++i) {
            const T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
#endif
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
template <class T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c, bool accumulate) {
#ifdef REFCOLOR_HAVE_EIGEN
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> A(a, m, k), B(b, n, k);
    Eigen::Map<Mat> C(c, m, n);
    if (accumulate)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
#else
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = accumulate ? crow[j] : T(0);
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
#endif
}

} // namespace refcolor::detail
