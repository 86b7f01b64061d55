#pragma once

// Compute kernels for the network stack. Activations are batch-major,
// channels-last: [B x H x W x C]. Convolution goes through im2col plus a
// blocked GEMM so the inner loops vectorize; everything heavy is OpenMP
// parallel over rows whose reductions stay inside one thread, which makes
// results independent of the thread count. kernels::ref holds naive serial
// implementations of the same contracts, kept for equivalence tests and the
// kernel benchmark.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nesy/rng.hpp"

namespace nesy::kernels {

// C[M x N] += A[M x K] * B[K x N]
template <class T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
    constexpr int IB = 64, KB = 256;
#pragma omp parallel for schedule(static)
    for (int ib = 0; ib < (M + IB - 1) / IB; ++ib) {
        const int i0 = ib * IB, iend = std::min(i0 + IB, M);
        for (int k0 = 0; k0 < K; k0 += KB) {
            const int kend = std::min(k0 + KB, K);
            for (int i = i0; i < iend; ++i) {
                const T* arow = A + static_cast<size_t>(i) * K;
                T* crow = C + static_cast<size_t>(i) * N;
                for (int k = k0; k < kend; ++k) {
                    const T a = arow[k];
                    const T* brow = B + static_cast<size_t>(k) * N;
#pragma omp simd
                    for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
                }
            }
        }
    }
}

// C[M x N] += A[M x J] * B[N x J]^T
template <class T>
void gemm_nt(int M, int N, int J, const T* A, const T* B, T* C) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        const T* arow = A + static_cast<size_t>(i) * J;
        T* crow = C + static_cast<size_t>(i) * N;
        for (int n = 0; n < N; ++n) {
            const T* brow = B + static_cast<size_t>(n) * J;
            T acc = 0;
#pragma omp simd reduction(+ : acc)
            for (int j = 0; j < J; ++j) acc += arow[j] * brow[j];
            crow[n] += acc;
        }
    }
}

// C[M x N] += A[L x M]^T * B[L x N]
template <class T>
void gemm_tn(int M, int N, int L, const T* A, const T* B, T* C) {
    constexpr int MB = 64;
#pragma omp parallel for schedule(static)
    for (int mb = 0; mb < (M + MB - 1) / MB; ++mb) {
        const int m0 = mb * MB, mend = std::min(m0 + MB, M);
        for (int l = 0; l < L; ++l) {
            const T* arow = A + static_cast<size_t>(l) * M;
            const T* brow = B + static_cast<size_t>(l) * N;
            for (int m = m0; m < mend; ++m) {
                const T a = arow[m];
                T* crow = C + static_cast<size_t>(m) * N;
#pragma omp simd
                for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
            }
        }
    }
}

inline int conv_out(int in, int k, int s) { return (in - k) / s + 1; }

// x [B x H x W x C] -> cols [B*OH*OW x KH*KW*C]
template <class T>
void im2col(const T* x, int B, int H, int W, int C, int KH, int KW, int SH, int SW, T* cols) {
    const int OH = conv_out(H, KH, SH), OW = conv_out(W, KW, SW);
    const size_t K = static_cast<size_t>(KH) * KW * C;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        const T* xb = x + static_cast<size_t>(b) * H * W * C;
        T* crow = cols + static_cast<size_t>(b) * OH * OW * K;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                for (int ky = 0; ky < KH; ++ky) {
                    const T* src = xb + (static_cast<size_t>(oy * SH + ky) * W + ox * SW) * C;
                    std::copy(src, src + static_cast<size_t>(KW) * C, crow + static_cast<size_t>(ky) * KW * C);
                }
                crow += K;
            }
        }
    }
}

// scatter-add transpose of im2col; dx must be zeroed by the caller
template <class T>
void col2im(const T* cols, int B, int H, int W, int C, int KH, int KW, int SH, int SW, T* dx) {
    const int OH = conv_out(H, KH, SH), OW = conv_out(W, KW, SW);
    const size_t K = static_cast<size_t>(KH) * KW * C;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        T* xb = dx + static_cast<size_t>(b) * H * W * C;
        const T* crow = cols + static_cast<size_t>(b) * OH * OW * K;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                for (int ky = 0; ky < KH; ++ky) {
                    T* dst = xb + (static_cast<size_t>(oy * SH + ky) * W + ox * SW) * C;
                    const T* src = crow + static_cast<size_t>(ky) * KW * C;
                    for (size_t j = 0; j < static_cast<size_t>(KW) * C; ++j) dst[j] += src[j];
                }
                crow += K;
            }
        }
    }
}

template <class T>
void add_bias(T* y, int M, int N, const T* b) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        T* row = y + static_cast<size_t>(i) * N;
#pragma omp simd
        for (int j = 0; j < N; ++j) row[j] += b[j];
    }
}

// db[j] += sum_m dy[m, j]
template <class T>
void bias_grad(const T* dy, int M, int N, T* db) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < N; ++j) {
        T acc = 0;
        for (int m = 0; m < M; ++m) acc += dy[static_cast<size_t>(m) * N + j];
        db[j] += acc;
    }
}

// y = x * W + b over flattened rows; W is [K x N]
template <class T>
void dense_forward(const T* x, int B, int K, int N, const T* W, const T* bias, T* y) {
    std::fill(y, y + static_cast<size_t>(B) * N, T(0));
    gemm_nn(B, N, K, x, W, y);
    add_bias(y, B, N, bias);
}

// accumulates dW/db; writes dx (unless null)
template <class T>
void dense_backward(const T* x, const T* dy, int B, int K, int N, const T* W, T* dW, T* db,
                    T* dx) {
    gemm_tn(K, N, B, x, dy, dW);
    bias_grad(dy, B, N, db);
    if (dx) {
        std::fill(dx, dx + static_cast<size_t>(B) * K, T(0));
        gemm_nt(B, K, N, dy, W, dx);
    }
}

// W is [KH*KW*C x OC]; cols is caller-provided workspace [B*OH*OW x KH*KW*C]
template <class T>
void conv_forward(const T* x, int B, int H, int W_, int C, int KH, int KW, int SH, int SW, int OC,
                  const T* W, const T* bias, T* y, T* cols) {
    const int OH = conv_out(H, KH, SH), OW = conv_out(W_, KW, SW);
    const int M = B * OH * OW, K = KH * KW * C;
    im2col(x, B, H, W_, C, KH, KW, SH, SW, cols);
    std::fill(y, y + static_cast<size_t>(M) * OC, T(0));
    gemm_nn(M, OC, K, cols, W, y);
    add_bias(y, M, OC, bias);
}

// needs the forward cols; dcols is workspace of the same size
template <class T>
void conv_backward(const T* cols, const T* dy, int B, int H, int W_, int C, int KH, int KW, int SH,
                   int SW, int OC, const T* W, T* dW, T* db, T* dx, T* dcols) {
    const int OH = conv_out(H, KH, SH), OW = conv_out(W_, KW, SW);
    const int M = B * OH * OW, K = KH * KW * C;
    gemm_tn(K, OC, M, cols, dy, dW);
    bias_grad(dy, M, OC, db);
    if (dx) {
        std::fill(dcols, dcols + static_cast<size_t>(M) * K, T(0));
        gemm_nt(M, K, OC, dy, W, dcols);
        std::fill(dx, dx + static_cast<size_t>(B) * H * W_ * C, T(0));
        col2im(dcols, B, H, W_, C, KH, KW, SH, SW, dx);
    }
}

// non-overlapping max pooling over H x W, window = stride = (PH, PW);
// ties go to the earliest window element
template <class T>
void maxpool_forward(const T* x, int B, int H, int W, int C, int PH, int PW, T* y, int* argmax) {
    const int OH = H / PH, OW = W / PW;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        const T* xb = x + static_cast<size_t>(b) * H * W * C;
        T* yb = y + static_cast<size_t>(b) * OH * OW * C;
        int* ab = argmax + static_cast<size_t>(b) * OH * OW * C;
        for (int oy = 0; oy < OH; ++oy) {
            for (int ox = 0; ox < OW; ++ox) {
                for (int c = 0; c < C; ++c) {
                    int best = (oy * PH * W + ox * PW) * C + c;
                    T bv = xb[best];
                    for (int py = 0; py < PH; ++py) {
                        for (int px = 0; px < PW; ++px) {
                            const int idx = ((oy * PH + py) * W + ox * PW + px) * C + c;
                            if (xb[idx] > bv) {
                                bv = xb[idx];
                                best = idx;
                            }
                        }
                    }
                    yb[(oy * OW + ox) * C + c] = bv;
                    ab[(oy * OW + ox) * C + c] = best;
                }
            }
        }
    }
}

// dx must be zeroed by the caller
template <class T>
void maxpool_backward(const T* dy, const int* argmax, int B, int H, int W, int C, int PH, int PW,
                      T* dx) {
    const int OH = H / PH, OW = W / PW;
    const size_t on = static_cast<size_t>(OH) * OW * C;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        const T* dyb = dy + static_cast<size_t>(b) * on;
        const int* ab = argmax + static_cast<size_t>(b) * on;
        T* dxb = dx + static_cast<size_t>(b) * H * W * C;
        for (size_t o = 0; o < on; ++o) dxb[ab[o]] += dyb[o];
    }
}

template <class T>
void relu_forward(const T* x, size_t n, T* y) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) y[i] = x[i] > 0 ? x[i] : T(0);
}

template <class T>
void relu_backward(const T* x, const T* dy, size_t n, T* dx) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) dx[i] = x[i] > 0 ? dy[i] : T(0);
}

// inverted dropout; the kept mask value is 1/(1-rate). Mask elements are
// derived by hashing (seed, index) so the result is identical for any
// thread count.
template <class T>
void dropout_forward(const T* x, size_t n, double rate, uint64_t seed, T* y, T* mask) {
    const double keep = 1.0 - rate;
    const T scale = static_cast<T>(1.0 / keep);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const double u = static_cast<double>(mix64(seed + static_cast<uint64_t>(i)) >> 11) * 0x1.0p-53;
        mask[i] = u < keep ? scale : T(0);
        y[i] = x[i] * mask[i];
    }
}

template <class T>
void dropout_backward(const T* dy, const T* mask, size_t n, T* dx) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) dx[i] = dy[i] * mask[i];
}

// returns false (and leaves everything untouched) when any gradient is
// non-finite; t is the 1-based step number
template <class T>
bool adam_update(T* w, const T* g, T* m, T* v, size_t n, double lr, double b1, double b2,
                 double eps, int64_t t) {
    double probe = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : probe)
    for (long i = 0; i < static_cast<long>(n); ++i) probe += static_cast<double>(g[i]);
    if (!std::isfinite(probe)) return false;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
        const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        w[i] = static_cast<T>(static_cast<double>(w[i]) -
                              lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps));
    }
    return true;
}

}  // namespace nesy::kernels

namespace nesy::kernels::ref {

// direct-loop serial twins of the fast path, same layouts and conventions

template <class T>
void conv_forward(const T* x, int B, int H, int W_, int C, int KH, int KW, int SH, int SW, int OC,
                  const T* W, const T* bias, T* y) {
    const int OH = conv_out(H, KH, SH), OW = conv_out(W_, KW, SW);
    for (int b = 0; b < B; ++b) {
        const T* xb = x + static_cast<size_t>(b) * H * W_ * C;
        T* yb = y + static_cast<size_t>(b) * OH * OW * OC;
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox)
                for (int oc = 0; oc < OC; ++oc) {
                    T acc = bias[oc];
                    for (int ky = 0; ky < KH; ++ky)
                        for (int kx = 0; kx < KW; ++kx)
                            for (int c = 0; c < C; ++c)
                                acc += xb[((oy * SH + ky) * W_ + ox * SW + kx) * C + c] *
                                       W[static_cast<size_t>((ky * KW + kx) * C + c) * OC + oc];
                    yb[(oy * OW + ox) * OC + oc] = acc;
                }
    }
}

template <class T>
void conv_backward(const T* x, const T* dy, int B, int H, int W_, int C, int KH, int KW, int SH,
                   int SW, int OC, const T* W, T* dW, T* db, T* dx) {
    const int OH = conv_out(H, KH, SH), OW = conv_out(W_, KW, SW);
    if (dx) std::fill(dx, dx + static_cast<size_t>(B) * H * W_ * C, T(0));
    for (int b = 0; b < B; ++b) {
        const T* xb = x + static_cast<size_t>(b) * H * W_ * C;
        T* dxb = dx ? dx + static_cast<size_t>(b) * H * W_ * C : nullptr;
        const T* dyb = dy + static_cast<size_t>(b) * OH * OW * OC;
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox)
                for (int oc = 0; oc < OC; ++oc) {
                    const T g = dyb[(oy * OW + ox) * OC + oc];
                    db[oc] += g;
                    for (int ky = 0; ky < KH; ++ky)
                        for (int kx = 0; kx < KW; ++kx)
                            for (int c = 0; c < C; ++c) {
                                const size_t xi = ((oy * SH + ky) * W_ + ox * SW + kx) * C + c;
                                const size_t wi =
                                    static_cast<size_t>((ky * KW + kx) * C + c) * OC + oc;
                                dW[wi] += xb[xi] * g;
                                if (dxb) dxb[xi] += W[wi] * g;
                            }
                }
    }
}

template <class T>
void dense_forward(const T* x, int B, int K, int N, const T* W, const T* bias, T* y) {
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < N; ++j) {
            T acc = bias[j];
            for (int k = 0; k < K; ++k)
                acc += x[static_cast<size_t>(b) * K + k] * W[static_cast<size_t>(k) * N + j];
            y[static_cast<size_t>(b) * N + j] = acc;
        }
}

template <class T>
void dense_backward(const T* x, const T* dy, int B, int K, int N, const T* W, T* dW, T* db,
                    T* dx) {
    if (dx) std::fill(dx, dx + static_cast<size_t>(B) * K, T(0));
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < N; ++j) {
            const T g = dy[static_cast<size_t>(b) * N + j];
            db[j] += g;
            for (int k = 0; k < K; ++k) {
                dW[static_cast<size_t>(k) * N + j] += x[static_cast<size_t>(b) * K + k] * g;
                if (dx) dx[static_cast<size_t>(b) * K + k] += W[static_cast<size_t>(k) * N + j] * g;
            }
        }
}

template <class T>
void maxpool_forward(const T* x, int B, int H, int W, int C, int PH, int PW, T* y, int* argmax) {
    const int OH = H / PH, OW = W / PW;
    for (int b = 0; b < B; ++b) {
        const T* xb = x + static_cast<size_t>(b) * H * W * C;
        T* yb = y + static_cast<size_t>(b) * OH * OW * C;
        int* ab = argmax + static_cast<size_t>(b) * OH * OW * C;
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox)
                for (int c = 0; c < C; ++c) {
                    int best = (oy * PH * W + ox * PW) * C + c;
                    T bv = xb[best];
                    for (int py = 0; py < PH; ++py)
                        for (int px = 0; px < PW; ++px) {
                            const int idx = ((oy * PH + py) * W + ox * PW + px) * C + c;
                            if (xb[idx] > bv) {
                                bv = xb[idx];
                                best = idx;
                            }
                        }
                    yb[(oy * OW + ox) * C + c] = bv;
                    ab[(oy * OW + ox) * C + c] = best;
                }
    }
}

}  // namespace nesy::kernels::ref
