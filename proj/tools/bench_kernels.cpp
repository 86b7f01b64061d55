// Times the blocked OpenMP kernels against the naive serial reference and
// cross-checks their outputs. Run with OMP_NUM_THREADS to see scaling.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "nesy/nn/kernels.hpp"
#include "nesy/rng.hpp"

using namespace nesy;
using clk = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
    fn();  // warm up
    const auto t0 = clk::now();
    for (int i = 0; i < iters; ++i) fn();
    return std::chrono::duration<double, std::milli>(clk::now() - t0).count() / iters;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(double(a[i]) - b[i]));
    return m;
}

void fill(std::vector<float>& v, Rng& rng) {
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
}

void row(const char* name, double fast_ms, double ref_ms, double diff) {
    std::printf("%-28s %10.3f %10.3f %8.2fx %12.3g\n", name, fast_ms, ref_ms, ref_ms / fast_ms,
                diff);
}

}  // namespace

int main() {
    Rng rng(12345);
    std::printf("%-28s %10s %10s %9s %12s\n", "kernel", "fast ms", "ref ms", "speedup",
                "max |diff|");

    {  // board-scale conv, forward and backward
        const int B = 8, H = 84, W = 84, C = 1, KH = 5, KW = 5, S = 2, OC = 6;
        const int OH = kernels::conv_out(H, KH, S), OW = kernels::conv_out(W, KW, S);
        const int K = KH * KW * C, M = B * OH * OW;
        std::vector<float> x(size_t(B) * H * W * C), w(size_t(K) * OC), b(OC);
        std::vector<float> y(size_t(M) * OC), yr(y.size()), cols(size_t(M) * K);
        fill(x, rng), fill(w, rng), fill(b, rng);

        const double tf = time_ms(
            [&] {
                kernels::conv_forward(x.data(), B, H, W, C, KH, KW, S, S, OC, w.data(), b.data(),
                                      y.data(), cols.data());
            },
            20);
        const double tr = time_ms(
            [&] {
                kernels::ref::conv_forward(x.data(), B, H, W, C, KH, KW, S, S, OC, w.data(),
                                           b.data(), yr.data());
            },
            5);
        row("conv 84x84x1->6 k5 s2 fwd", tf, tr, max_abs_diff(y, yr));

        std::vector<float> dy(y.size()), dw(w.size(), 0), db(OC, 0), dx(x.size(), 0);
        std::vector<float> dwr(w.size(), 0), dbr(OC, 0), dxr(x.size(), 0), dcols(cols.size());
        fill(dy, rng);
        const double tbf = time_ms(
            [&] {
                std::fill(dw.begin(), dw.end(), 0.0f);
                std::fill(db.begin(), db.end(), 0.0f);
                std::fill(dx.begin(), dx.end(), 0.0f);
                kernels::conv_backward(cols.data(), dy.data(), B, H, W, C, KH, KW, S, S, OC,
                                       w.data(), dw.data(), db.data(), dx.data(), dcols.data());
            },
            20);
        const double tbr = time_ms(
            [&] {
                std::fill(dwr.begin(), dwr.end(), 0.0f);
                std::fill(dbr.begin(), dbr.end(), 0.0f);
                std::fill(dxr.begin(), dxr.end(), 0.0f);
                kernels::ref::conv_backward(x.data(), dy.data(), B, H, W, C, KH, KW, S, S, OC,
                                            w.data(), dwr.data(), dbr.data(), dxr.data());
            },
            5);
        const double diff = std::max({max_abs_diff(dw, dwr), max_abs_diff(db, dbr),
                                      max_abs_diff(dx, dxr)});
        row("conv 84x84x1->6 k5 s2 bwd", tbf, tbr, diff);
    }

    {  // wide dense layer, forward and backward
        const int B = 64, IN = 3936, OUT = 256;
        std::vector<float> x(size_t(B) * IN), w(size_t(IN) * OUT), b(OUT);
        std::vector<float> y(size_t(B) * OUT), yr(y.size());
        fill(x, rng), fill(w, rng), fill(b, rng);
        const double tf = time_ms(
            [&] { kernels::dense_forward(x.data(), B, IN, OUT, w.data(), b.data(), y.data()); },
            20);
        const double tr = time_ms(
            [&] { kernels::ref::dense_forward(x.data(), B, IN, OUT, w.data(), b.data(), yr.data()); },
            5);
        row("dense 3936->256 b64 fwd", tf, tr, max_abs_diff(y, yr));

        std::vector<float> dy(y.size()), dw(w.size(), 0), db(OUT, 0), dx(x.size(), 0);
        std::vector<float> dwr(w.size(), 0), dbr(OUT, 0), dxr(x.size(), 0);
        fill(dy, rng);
        const double tbf = time_ms(
            [&] {
                std::fill(dw.begin(), dw.end(), 0.0f);
                std::fill(db.begin(), db.end(), 0.0f);
                kernels::dense_backward(x.data(), dy.data(), B, IN, OUT, w.data(), dw.data(),
                                        db.data(), dx.data());
            },
            20);
        const double tbr = time_ms(
            [&] {
                std::fill(dwr.begin(), dwr.end(), 0.0f);
                std::fill(dbr.begin(), dbr.end(), 0.0f);
                kernels::ref::dense_backward(x.data(), dy.data(), B, IN, OUT, w.data(), dwr.data(),
                                             dbr.data(), dxr.data());
            },
            5);
        const double diff =
            std::max({max_abs_diff(dw, dwr), max_abs_diff(db, dbr), max_abs_diff(dx, dxr)});
        row("dense 3936->256 b64 bwd", tbf, tbr, diff);
    }

    {  // pooling
        const int B = 32, H = 40, W = 40, C = 6, P = 2;
        std::vector<float> x(size_t(B) * H * W * C), y(size_t(B) * (H / P) * (W / P) * C),
            yr(y.size());
        std::vector<int> am(y.size()), amr(y.size());
        fill(x, rng);
        const double tf = time_ms(
            [&] { kernels::maxpool_forward(x.data(), B, H, W, C, P, P, y.data(), am.data()); }, 50);
        const double tr = time_ms(
            [&] { kernels::ref::maxpool_forward(x.data(), B, H, W, C, P, P, yr.data(), amr.data()); },
            50);
        row("maxpool 40x40x6 p2", tf, tr, max_abs_diff(y, yr));
    }

    {  // raw GEMM rate at the conv-as-GEMM shape of the 256-wide window net
        const int M = 64 * 246, N = 32, K = 128;
        std::vector<float> a(size_t(M) * K), bm(size_t(K) * N), c(size_t(M) * N, 0);
        fill(a, rng), fill(bm, rng);
        const double t = time_ms(
            [&] {
                std::fill(c.begin(), c.end(), 0.0f);
                kernels::gemm_nn(M, N, K, a.data(), bm.data(), c.data());
            },
            20);
        std::printf("%-28s %10.3f ms  -> %6.2f GFLOP/s\n", "gemm 15744x32x128", t,
                    2.0 * M * N * K / (t * 1e6));
    }
    return 0;
}
