#pragma once

#include <cstddef>
#include <vector>

// Row-major dense kernels used by the graph ops. All accumulate into C.
namespace mixpt::nn::kernels {

// C[m, n] += A[m, k] * B[k, n]
template <typename T>
void gemm_nn(const T* __restrict A, const T* __restrict B, T* __restrict C, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* c = C + i * n;
        const T* a = A + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[p];
            const T* b = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[k, n] += A[m, k]^T * B[m, n]
template <typename T>
void gemm_tn(const T* __restrict A, const T* __restrict B, T* __restrict C, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* a = A + i * k;
        const T* b = B + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[p];
            T* c = C + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
    std::vector<T> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
    return out;
}

}  // namespace mixpt::nn::kernels
