#pragma once

// Inner-loop kernels behind the graph ops. The production versions dispatch
// on problem size: small tensors take the plain serial path, large ones the
// OpenMP path. kern::ref holds the serial implementations kept for
// equivalence testing and benchmarking (tools/bench_kernels.cpp). The size
// check is an explicit branch rather than an `if` clause on the pragma:
// entering the OpenMP runtime costs microseconds, which dwarfs the tiny
// per-record tensors this model trains on. Parallel kernels assign whole
// output rows or fixed-size blocks to threads, so the floating-point
// evaluation order per element never depends on the thread count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace covidcare::kern {

inline constexpr std::size_t kParThreshold = 65536;  // flops below this stay serial
inline constexpr std::size_t kSumBlock = 4096;       // fixed reduction block size
inline constexpr double kLogFloor = 1e-12;           // clamp for log inputs

namespace ref {

template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * n;
        std::fill(crow, crow + n, T{});
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void add(const T* a, const T* b, T* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

template <class T>
void mul(const T* a, const T* b, T* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

template <class T>
void sigmoid(const T* a, T* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = T(1) / (T(1) + std::exp(-a[i]));
}

template <class T>
void tanh(const T* a, T* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = std::tanh(a[i]);
}

template <class T>
void softmax_row(const T* x, T* y, std::size_t cols) {
    T mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    T z = T{};
    for (std::size_t j = 0; j < cols; ++j) {
        y[j] = std::exp(x[j] - mx);
        z += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
}

template <class T>
void softmax_rows(const T* a, T* c, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) softmax_row(a + r * cols, c + r * cols, cols);
}

template <class T>
T sum(const T* a, std::size_t n) {
    T s{};
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

}  // namespace ref

template <class T>
void matmul(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n < kParThreshold || m == 1) {
        ref::matmul(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        T* crow = c + i * n;
        std::fill(crow, crow + n, T{});
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c(m x n) += a(m x k) . b(n x k)^T; accumulates into c
template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n < kParThreshold || m == 1) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                T s{};
                const T* arow = a + i * k;
                const T* brow = b + j * k;
                for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
                c[i * n + j] += s;
            }
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < n; ++j) {
            T s{};
            const T* arow = a + i * k;
            const T* brow = b + j * k;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c[i * n + j] += s;
        }
    }
}

// c(k x n) += a(m x k)^T . g(m x n); accumulates into c
template <class T>
void matmul_tn_acc(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n < kParThreshold || k == 1) {
        for (std::size_t p = 0; p < k; ++p) {
            T* crow = c + p * n;
            for (std::size_t i = 0; i < m; ++i) {
                const T av = a[i * k + p];
                const T* grow = g + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
            }
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(k); ++pp) {
        const auto p = static_cast<std::size_t>(pp);
        T* crow = c + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T av = a[i * k + p];
            const T* grow = g + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

template <class T>
void add(const T* a, const T* b, T* c, std::size_t n) {
    if (n < kParThreshold) {
        ref::add(a, b, c, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) c[i] = a[i] + b[i];
}

template <class T>
void mul(const T* a, const T* b, T* c, std::size_t n) {
    if (n < kParThreshold) {
        ref::mul(a, b, c, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) c[i] = a[i] * b[i];
}

template <class T>
void sigmoid(const T* a, T* c, std::size_t n) {
    if (n < kParThreshold) {
        ref::sigmoid(a, c, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
        c[i] = T(1) / (T(1) + std::exp(-a[i]));
}

template <class T>
void tanh(const T* a, T* c, std::size_t n) {
    if (n < kParThreshold) {
        ref::tanh(a, c, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) c[i] = std::tanh(a[i]);
}

// Max-subtracted row softmax.
template <class T>
void softmax_rows(const T* a, T* c, std::size_t rows, std::size_t cols) {
    if (rows * cols < kParThreshold || rows == 1) {
        ref::softmax_rows(a, c, rows, cols);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(rows); ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        ref::softmax_row(a + r * cols, c + r * cols, cols);
    }
}

template <class T>
void log_clamped(const T* a, T* c, std::size_t n) {
    const T floor = static_cast<T>(kLogFloor);
    for (std::size_t i = 0; i < n; ++i) c[i] = std::log(std::max(a[i], floor));
}

// Blocked reduction: block partials are combined in block order, so the
// result is identical for any thread count.
template <class T>
T sum(const T* a, std::size_t n) {
    if (n <= kSumBlock) return ref::sum(a, n);
    const std::size_t nblocks = (n + kSumBlock - 1) / kSumBlock;
    std::vector<T> partial(nblocks, T{});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(nblocks); ++bb) {
        const auto b = static_cast<std::size_t>(bb);
        const std::size_t lo = b * kSumBlock;
        const std::size_t hi = std::min(lo + kSumBlock, n);
        partial[b] = ref::sum(a + lo, hi - lo);
    }
    T s{};
    for (std::size_t b = 0; b < nblocks; ++b) s += partial[b];
    return s;
}

template <class T>
void transpose(const T* a, T* c, std::size_t rows, std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) c[j * rows + i] = a[i * cols + j];
}

}  // namespace covidcare::kern
