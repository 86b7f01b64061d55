#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nesy/nn/kernels.hpp"

using namespace nesy;

namespace {

template <class T>
std::vector<T> randv(size_t n, uint64_t seed, double span = 1.0) {
    Rng rng(seed);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(-span, span));
    return v;
}

template <class T>
void check_close(const std::vector<T>& a, const std::vector<T>& b, double rel, double abs) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double diff = std::abs(double(a[i]) - double(b[i]));
        const double scale = std::max(std::abs(double(a[i])), std::abs(double(b[i])));
        CHECK(diff <= abs + rel * scale);
    }
}

}  // namespace

TEST_CASE("blocked gemm variants agree with naive triple loops") {
    const int M = 17, N = 23, K = 31;
    const auto A = randv<double>(M * K, 1);
    const auto B = randv<double>(K * N, 2);

    std::vector<double> got(M * N, 0.0), want(M * N, 0.0);
    kernels::gemm_nn(M, N, K, A.data(), B.data(), got.data());
    for (int i = 0; i < M; ++i)
        for (int k = 0; k < K; ++k)
            for (int j = 0; j < N; ++j) want[i * N + j] += A[i * K + k] * B[k * N + j];
    check_close(got, want, 1e-13, 1e-13);

    // A [M x J] times B^T where B is [N x J]
    const auto Bt = randv<double>(N * K, 3);
    std::fill(got.begin(), got.end(), 0.0);
    std::fill(want.begin(), want.end(), 0.0);
    kernels::gemm_nt(M, N, K, A.data(), Bt.data(), got.data());
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < K; ++k) want[i * N + j] += A[i * K + k] * Bt[j * K + k];
    check_close(got, want, 1e-13, 1e-13);

    // A^T [L x M] times B [L x N]
    const int L = 13;
    const auto At = randv<double>(L * M, 4);
    const auto Bl = randv<double>(L * N, 5);
    std::fill(got.begin(), got.end(), 0.0);
    std::fill(want.begin(), want.end(), 0.0);
    kernels::gemm_tn(M, N, L, At.data(), Bl.data(), got.data());
    for (int l = 0; l < L; ++l)
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < N; ++j) want[i * N + j] += At[l * M + i] * Bl[l * N + j];
    check_close(got, want, 1e-13, 1e-13);
}

TEST_CASE("gemm accumulates into existing output") {
    const int M = 3, N = 4, K = 2;
    const auto A = randv<double>(M * K, 6);
    const auto B = randv<double>(K * N, 7);
    std::vector<double> once(M * N, 1.0), twice(M * N, 1.0);
    kernels::gemm_nn(M, N, K, A.data(), B.data(), once.data());
    kernels::gemm_nn(M, N, K, A.data(), B.data(), twice.data());
    kernels::gemm_nn(M, N, K, A.data(), B.data(), twice.data());
    for (int i = 0; i < M * N; ++i)
        CHECK(twice[i] == doctest::Approx(2 * once[i] - 1.0).epsilon(1e-12));
}

TEST_CASE("im2col and col2im are adjoint") {
    const int B = 2, H = 7, W = 9, C = 3, KH = 3, KW = 2, SH = 2, SW = 1;
    const int OH = kernels::conv_out(H, KH, SH), OW = kernels::conv_out(W, KW, SW);
    const size_t xn = size_t(B) * H * W * C;
    const size_t cn = size_t(B) * OH * OW * KH * KW * C;
    const auto x = randv<double>(xn, 8);
    const auto c = randv<double>(cn, 9);

    std::vector<double> cols(cn, 0.0);
    kernels::im2col(x.data(), B, H, W, C, KH, KW, SH, SW, cols.data());
    std::vector<double> dx(xn, 0.0);
    kernels::col2im(c.data(), B, H, W, C, KH, KW, SH, SW, dx.data());

    // <c, im2col(x)> must equal <col2im(c), x>
    double lhs = 0, rhs = 0;
    for (size_t i = 0; i < cn; ++i) lhs += c[i] * cols[i];
    for (size_t i = 0; i < xn; ++i) rhs += dx[i] * x[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("fast conv forward matches the direct reference on real shapes") {
    struct Shape {
        int B, H, W, C, KH, KW, SH, SW, OC;
    };
    for (const auto& s : {Shape{2, 28, 28, 1, 5, 5, 1, 1, 6}, Shape{2, 84, 84, 1, 5, 5, 2, 2, 6},
                          Shape{3, 12, 12, 6, 5, 5, 1, 1, 16}, Shape{4, 1, 50, 1, 1, 8, 1, 1, 32}}) {
        const int OH = kernels::conv_out(s.H, s.KH, s.SH), OW = kernels::conv_out(s.W, s.KW, s.SW);
        const int K = s.KH * s.KW * s.C, M = s.B * OH * OW;
        const auto x = randv<float>(size_t(s.B) * s.H * s.W * s.C, 10);
        const auto w = randv<float>(size_t(K) * s.OC, 11);
        const auto b = randv<float>(s.OC, 12);

        std::vector<float> fast(size_t(M) * s.OC), cols(size_t(M) * K);
        kernels::conv_forward(x.data(), s.B, s.H, s.W, s.C, s.KH, s.KW, s.SH, s.SW, s.OC, w.data(),
                              b.data(), fast.data(), cols.data());
        std::vector<float> slow(size_t(M) * s.OC);
        kernels::ref::conv_forward(x.data(), s.B, s.H, s.W, s.C, s.KH, s.KW, s.SH, s.SW, s.OC,
                                   w.data(), b.data(), slow.data());
        // float accumulation order differs between the two paths, so the
        // floor must absorb cancellation across ~150-term dot products
        check_close(fast, slow, 1e-5, 1e-5);
    }
}

TEST_CASE("fast conv backward matches the direct reference") {
    const int B = 2, H = 12, W = 10, C = 3, KH = 3, KW = 3, SH = 1, SW = 1, OC = 4;
    const int OH = kernels::conv_out(H, KH, SH), OW = kernels::conv_out(W, KW, SW);
    const int K = KH * KW * C, M = B * OH * OW;
    const auto x = randv<float>(size_t(B) * H * W * C, 13);
    const auto w = randv<float>(size_t(K) * OC, 14);
    const auto bias = randv<float>(OC, 15);
    const auto dy = randv<float>(size_t(M) * OC, 16);

    std::vector<float> y(size_t(M) * OC), cols(size_t(M) * K);
    kernels::conv_forward(x.data(), B, H, W, C, KH, KW, SH, SW, OC, w.data(), bias.data(), y.data(),
                          cols.data());
    std::vector<float> dw(w.size(), 0.0f), db(OC, 0.0f), dx(x.size(), 0.0f), dcols(cols.size());
    kernels::conv_backward(cols.data(), dy.data(), B, H, W, C, KH, KW, SH, SW, OC, w.data(),
                           dw.data(), db.data(), dx.data(), dcols.data());

    std::vector<float> dw2(w.size(), 0.0f), db2(OC, 0.0f), dx2(x.size(), 0.0f);
    kernels::ref::conv_backward(x.data(), dy.data(), B, H, W, C, KH, KW, SH, SW, OC, w.data(),
                                dw2.data(), db2.data(), dx2.data());
    check_close(dw, dw2, 1e-4, 1e-5);
    check_close(db, db2, 1e-4, 1e-5);
    check_close(dx, dx2, 1e-4, 1e-5);
}

TEST_CASE("fast dense layers match the direct reference") {
    const int B = 5, K = 37, N = 11;
    const auto x = randv<float>(size_t(B) * K, 17);
    const auto w = randv<float>(size_t(K) * N, 18);
    const auto bias = randv<float>(N, 19);
    const auto dy = randv<float>(size_t(B) * N, 20);

    std::vector<float> y(size_t(B) * N), y2(size_t(B) * N);
    kernels::dense_forward(x.data(), B, K, N, w.data(), bias.data(), y.data());
    kernels::ref::dense_forward(x.data(), B, K, N, w.data(), bias.data(), y2.data());
    check_close(y, y2, 1e-5, 1e-6);

    std::vector<float> dw(w.size(), 0.0f), db(N, 0.0f), dx(x.size(), 0.0f);
    std::vector<float> dw2(w.size(), 0.0f), db2(N, 0.0f), dx2(x.size(), 0.0f);
    kernels::dense_backward(x.data(), dy.data(), B, K, N, w.data(), dw.data(), db.data(), dx.data());
    kernels::ref::dense_backward(x.data(), dy.data(), B, K, N, w.data(), dw2.data(), db2.data(),
                                 dx2.data());
    check_close(dw, dw2, 1e-4, 1e-5);
    check_close(db, db2, 1e-4, 1e-5);
    check_close(dx, dx2, 1e-4, 1e-5);
}

TEST_CASE("max pooling matches the reference and keeps the earliest tie") {
    const int B = 3, H = 8, W = 6, C = 4, PH = 2, PW = 2;
    const auto x = randv<float>(size_t(B) * H * W * C, 21);
    const size_t on = size_t(B) * (H / PH) * (W / PW) * C;
    std::vector<float> y(on), y2(on);
    std::vector<int> am(on), am2(on);
    kernels::maxpool_forward(x.data(), B, H, W, C, PH, PW, y.data(), am.data());
    kernels::ref::maxpool_forward(x.data(), B, H, W, C, PH, PW, y2.data(), am2.data());
    CHECK(y == y2);
    CHECK(am == am2);

    // all-equal window: the first element wins
    std::vector<float> flat(4, 2.5f);
    std::vector<float> fy(1);
    std::vector<int> fam(1);
    kernels::maxpool_forward(flat.data(), 1, 2, 2, 1, 2, 2, fy.data(), fam.data());
    CHECK(fy[0] == 2.5f);
    CHECK(fam[0] == 0);

    // backward scatters each output gradient to its winner
    std::vector<float> dy(on);
    for (size_t i = 0; i < on; ++i) dy[i] = static_cast<float>(i + 1);
    std::vector<float> dx(x.size(), 0.0f);
    kernels::maxpool_backward(dy.data(), am.data(), B, H, W, C, PH, PW, dx.data());
    double sum_dx = 0, sum_dy = 0;
    for (float v : dx) sum_dx += v;
    for (float v : dy) sum_dy += v;
    CHECK(sum_dx == doctest::Approx(sum_dy));
    for (size_t o = 0; o < on; ++o) {
        const size_t b = o / ((H / PH) * (W / PW) * C);
        CHECK(dx[b * H * W * C + am[o]] >= dy[o] - 1e-6);  // winner received it
    }
}

TEST_CASE("relu forward and backward gate on the input sign") {
    const std::vector<float> x = {-1.0f, 0.0f, 2.5f, -0.1f};
    std::vector<float> y(4), dx(4);
    kernels::relu_forward(x.data(), 4, y.data());
    CHECK(y == std::vector<float>{0.0f, 0.0f, 2.5f, 0.0f});
    const std::vector<float> dy = {5.0f, 6.0f, 7.0f, 8.0f};
    kernels::relu_backward(x.data(), dy.data(), 4, dx.data());
    CHECK(dx == std::vector<float>{0.0f, 0.0f, 7.0f, 0.0f});
}

TEST_CASE("dropout masks are seeded, scaled, and applied symmetrically") {
    const size_t n = 20000;
    const auto x = randv<float>(n, 22);
    std::vector<float> y(n), mask(n), y2(n), mask2(n);
    kernels::dropout_forward(x.data(), n, 0.5, 99u, y.data(), mask.data());
    kernels::dropout_forward(x.data(), n, 0.5, 99u, y2.data(), mask2.data());
    CHECK(mask == mask2);  // same seed, same mask
    kernels::dropout_forward(x.data(), n, 0.5, 100u, y2.data(), mask2.data());
    CHECK(mask != mask2);

    size_t kept = 0;
    for (size_t i = 0; i < n; ++i) {
        CHECK((mask[i] == 0.0f || mask[i] == 2.0f));  // 1/(1-rate)
        CHECK(y[i] == x[i] * mask[i]);
        kept += mask[i] != 0.0f;
    }
    CHECK(std::abs(double(kept) / n - 0.5) < 0.02);

    std::vector<float> dx(n);
    const auto dy = randv<float>(n, 23);
    kernels::dropout_backward(dy.data(), mask.data(), n, dx.data());
    for (size_t i = 0; i < n; ++i) CHECK(dx[i] == dy[i] * mask[i]);
}

TEST_CASE("adam update follows the scalar reference formula") {
    const size_t n = 6;
    std::vector<double> w(n, 1.0), g = {0.5, -0.3, 0.0, 1.0, -1.0, 0.2};
    std::vector<double> m(n, 0.0), v(n, 0.0);
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;

    auto wref = w;
    auto mref = m, vref = v;
    for (int64_t t = 1; t <= 3; ++t) {
        REQUIRE(kernels::adam_update(w.data(), g.data(), m.data(), v.data(), n, lr, b1, b2, eps, t));
        for (size_t i = 0; i < n; ++i) {
            mref[i] = b1 * mref[i] + (1 - b1) * g[i];
            vref[i] = b2 * vref[i] + (1 - b2) * g[i] * g[i];
            const double mh = mref[i] / (1 - std::pow(b1, double(t)));
            const double vh = vref[i] / (1 - std::pow(b2, double(t)));
            wref[i] -= lr * mh / (std::sqrt(vh) + eps);
            CHECK(w[i] == doctest::Approx(wref[i]).epsilon(1e-12));
            CHECK(m[i] == doctest::Approx(mref[i]).epsilon(1e-12));
            CHECK(v[i] == doctest::Approx(vref[i]).epsilon(1e-12));
        }
    }

    // a NaN gradient leaves the state untouched
    g[2] = std::numeric_limits<double>::quiet_NaN();
    const auto keep = w;
    CHECK_FALSE(kernels::adam_update(w.data(), g.data(), m.data(), v.data(), n, lr, b1, b2, eps, 4));
    CHECK(w == keep);
}
