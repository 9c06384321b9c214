#pragma once

// Raw array kernels behind the tensor ops. Every kernel exists twice:
// kernels::serial is the plain reference implementation used by tests and
// the benchmark, kernels::par adds OpenMP worksharing over independent
// output elements. Each output element is accumulated in the same order in
// both variants, so the parallel results are bit-identical to the serial
// ones at any thread count.

#include <cmath>
#include <cstddef>

namespace bicnet::kernels {

// Parallelizing tiny loops costs more than it saves.
inline constexpr std::size_t kParGrain = 64;

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
template <typename S>
void matmul_nn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

// c[m x n] = a[m x k] * b[n x k]^T
template <typename S>
void matmul_nt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

// c[m x n] = a[k x m]^T * b[k x n]
template <typename S>
void matmul_tn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

// c += a * b variants, used by matmul backward.
template <typename S>
void matmul_nn_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] += acc;
        }
}

template <typename S>
void matmul_nt_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] += acc;
        }
}

template <typename S>
void matmul_tn_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] += acc;
        }
}

// Row-wise softmax with max subtraction, rows of length `n`, `rows` rows.
template <typename S>
void softmax_rows(const S* x, S* y, std::size_t rows, std::size_t n) {
    for (std::size_t r = 0; r < rows; ++r) {
        const S* xr = x + r * n;
        S* yr = y + r * n;
        S mx = xr[0];
        for (std::size_t j = 1; j < n; ++j) mx = xr[j] > mx ? xr[j] : mx;
        S sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (std::size_t j = 0; j < n; ++j) yr[j] /= sum;
    }
}

// y = gelu(x) = x * Phi(x), exact erf form.
template <typename S>
void gelu(const S* x, S* y, std::size_t n) {
    const S inv_sqrt2 = S(1) / std::sqrt(S(2));
    for (std::size_t i = 0; i < n; ++i) {
        S phi = S(0.5) * (S(1) + std::erf(x[i] * inv_sqrt2));
        y[i] = x[i] * phi;
    }
}

template <typename S>
void gelu_backward(const S* x, const S* dy, S* dx, std::size_t n) {
    const S inv_sqrt2 = S(1) / std::sqrt(S(2));
    const S inv_sqrt2pi = S(1) / std::sqrt(S(2) * S(M_PI));
    for (std::size_t i = 0; i < n; ++i) {
        S phi = S(0.5) * (S(1) + std::erf(x[i] * inv_sqrt2));
        S pdf = std::exp(S(-0.5) * x[i] * x[i]) * inv_sqrt2pi;
        dx[i] += dy[i] * (phi + x[i] * pdf);
    }
}

// Per-row layer norm over the last axis: y = (x - mu) / sqrt(var + eps) * gamma + beta.
// Also stores mu and inverse eta per row for the backward pass.
template <typename S>
void layer_norm_rows(const S* x, const S* gamma, const S* beta, S* y, S* mu_out, S* inv_eta_out,
                     std::size_t rows, std::size_t d, S eps) {
    for (std::size_t r = 0; r < rows; ++r) {
        const S* xr = x + r * d;
        S* yr = y + r * d;
        S mu = 0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= S(d);
        S var = 0;
        for (std::size_t j = 0; j < d; ++j) {
            S c = xr[j] - mu;
            var += c * c;
        }
        var /= S(d);
        S inv_eta = S(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * inv_eta * gamma[j] + beta[j];
        mu_out[r] = mu;
        inv_eta_out[r] = inv_eta;
    }
}

} // namespace serial

namespace par {

template <typename S>
void matmul_nn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParGrain)
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <typename S>
void matmul_nt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParGrain)
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

template <typename S>
void matmul_tn(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParGrain)
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

template <typename S>
void matmul_nn_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParGrain)
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] += acc;
        }
}

template <typename S>
void matmul_nt_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParGrain)
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] += acc;
        }
}

template <typename S>
void matmul_tn_acc(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParGrain)
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            S acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] += acc;
        }
}

template <typename S>
void softmax_rows(const S* x, S* y, std::size_t rows, std::size_t n) {
#pragma omp parallel for schedule(static) if (rows * n >= kParGrain)
    for (std::size_t r = 0; r < rows; ++r) {
        serial::softmax_rows(x + r * n, y + r * n, 1, n);
    }
}

template <typename S>
void gelu(const S* x, S* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParGrain)
    for (std::size_t i = 0; i < n; ++i) {
        serial::gelu(x + i, y + i, 1);
    }
}

template <typename S>
void gelu_backward(const S* x, const S* dy, S* dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kParGrain)
    for (std::size_t i = 0; i < n; ++i) {
        serial::gelu_backward(x + i, dy + i, dx + i, 1);
    }
}

template <typename S>
void layer_norm_rows(const S* x, const S* gamma, const S* beta, S* y, S* mu_out, S* inv_eta_out,
                     std::size_t rows, std::size_t d, S eps) {
#pragma omp parallel for schedule(static) if (rows * d >= kParGrain)
    for (std::size_t r = 0; r < rows; ++r) {
        serial::layer_norm_rows(x + r * d, gamma, beta, y + r * d, mu_out + r, inv_eta_out + r, 1,
                                d, eps);
    }
}

} // namespace par

} // namespace bicnet::kernels
