#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "auf/kernels.hpp"
#include "auf/rng.hpp"

using auf::kern::Ops;

namespace {

std::vector<double> random_vec(auf::Rng& rng, size_t n, double lo = -2.0,
                               double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol = 1e-12) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("sqdist_point matches direct computation") {
    auf::Rng rng(11);
    const size_t n = 37, m = 5;
    // Column-major: cols[t*n + j] = row j, variable t.
    auto cols = random_vec(rng, n * m);
    const size_t i = 13;
    std::vector<double> expect(n, 0.0);
    for (size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (size_t t = 0; t < m; ++t) {
            const double d = cols[t * n + j] - cols[t * n + i];
            s += d * d;
        }
        expect[j] = s;
    }
    std::vector<double> got(n);
    auf::kern::scalar_ops().sqdist_point(cols.data(), n, m, i, got.data());
    check_close(got, expect, 1e-14);
}

TEST_CASE("min_excluding skips exactly the given index") {
    std::vector<double> a = {5.0, 1.0, 3.0, 0.5, 2.0};
    const auto& k = auf::kern::scalar_ops();
    CHECK(k.min_excluding(a.data(), a.size(), 3) == 1.0);
    CHECK(k.min_excluding(a.data(), a.size(), 1) == 0.5);
    CHECK(k.min_excluding(a.data(), a.size(), 0) == 0.5);
    CHECK(k.min_excluding(a.data(), a.size(), 4) == 0.5);
    std::vector<double> one = {7.0};
    CHECK(k.min_excluding(one.data(), 1, 0) ==
          std::numeric_limits<double>::infinity());
}

TEST_CASE("matmul variants agree with triple loops and accumulate") {
    auf::Rng rng(22);
    const size_t m = 7, k = 9, n = 11;
    auto a = random_vec(rng, m * k);
    auto b = random_vec(rng, k * n);
    auto bt = random_vec(rng, n * k);
    auto c0 = random_vec(rng, m * n);
    const auto& ops = auf::kern::scalar_ops();

    SUBCASE("nn") {
        auto expect = c0;
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * n + j];
                expect[i * n + j] += s;
            }
        auto got = c0;
        ops.matmul_nn_acc(a.data(), b.data(), got.data(), m, k, n);
        check_close(got, expect, 1e-13);
    }
    SUBCASE("nt") {
        auto expect = c0;
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (size_t t = 0; t < k; ++t)
                    s += a[i * k + t] * bt[j * k + t];
                expect[i * n + j] += s;
            }
        auto got = c0;
        ops.matmul_nt_acc(a.data(), bt.data(), got.data(), m, k, n);
        check_close(got, expect, 1e-13);
    }
    SUBCASE("tn") {
        auto at = random_vec(rng, m * k);  // interpreted as (m x k), out k x n
        auto bb = random_vec(rng, m * n);
        auto cc = random_vec(rng, k * n);
        auto expect = cc;
        for (size_t i = 0; i < k; ++i)
            for (size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (size_t t = 0; t < m; ++t)
                    s += at[t * k + i] * bb[t * n + j];
                expect[i * n + j] += s;
            }
        auto got = cc;
        ops.matmul_tn_acc(at.data(), bb.data(), got.data(), m, k, n);
        check_close(got, expect, 1e-13);
    }
}

TEST_CASE("adam_update matches the reference recurrence") {
    auf::Rng rng(33);
    const size_t n = 13;
    auto p = random_vec(rng, n);
    auto g = random_vec(rng, n);
    std::vector<double> m(n, 0.0), v(n, 0.0);
    auto p2 = p;
    auto m2 = m, v2 = v;
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 3; ++t) {
        const double c1 = 1.0 / (1.0 - std::pow(b1, t));
        const double c2 = 1.0 / (1.0 - std::pow(b2, t));
        auf::kern::scalar_ops().adam_update(p.data(), m.data(), v.data(),
                                            g.data(), n, lr, b1, b2, eps, c1,
                                            c2);
        for (size_t i = 0; i < n; ++i) {
            m2[i] = b1 * m2[i] + (1 - b1) * g[i];
            v2[i] = b2 * v2[i] + (1 - b2) * g[i] * g[i];
            p2[i] -= lr * (m2[i] * c1) / (std::sqrt(v2[i] * c2) + eps);
        }
    }
    check_close(p, p2, 1e-14);
}

TEST_CASE("avx2 table agrees with scalar table") {
    const Ops& simd = auf::kern::ops();
    const Ops& ref = auf::kern::scalar_ops();
    if (std::string(simd.name) == "scalar") {
        MESSAGE("no AVX2 on this host; dispatch check only");
        CHECK(std::string(ref.name) == "scalar");
        return;
    }
    auf::Rng rng(44);
    // Odd sizes exercise the vector tails.
    for (size_t n : {1u, 3u, 4u, 7u, 16u, 33u, 101u}) {
        const size_t m = 3;
        auto cols = random_vec(rng, n * m);
        std::vector<double> got(n), expect(n);
        for (size_t i = 0; i < n; i += (n > 5 ? n / 3 : 1)) {
            simd.sqdist_point(cols.data(), n, m, i, got.data());
            ref.sqdist_point(cols.data(), n, m, i, expect.data());
            check_close(got, expect);
            // Pure selection, so bit-exact on identical input.
            CHECK(simd.min_excluding(got.data(), n, i) ==
                  ref.min_excluding(got.data(), n, i));
        }
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);
        CHECK(simd.dot(x.data(), y.data(), n) ==
              doctest::Approx(ref.dot(x.data(), y.data(), n)).epsilon(1e-12));
        CHECK(simd.reduce_sum(x.data(), n) ==
              doctest::Approx(ref.reduce_sum(x.data(), n)).epsilon(1e-12));
        auto y1 = y, y2 = y;
        simd.axpy(0.37, x.data(), y1.data(), n);
        ref.axpy(0.37, x.data(), y2.data(), n);
        check_close(y1, y2);
    }
    for (size_t m : {1u, 2u, 5u}) {
        for (size_t k : {1u, 4u, 7u}) {
            for (size_t n : {1u, 3u, 8u, 13u}) {
                auto a = random_vec(rng, m * k);
                auto b = random_vec(rng, k * n);
                auto bt = random_vec(rng, n * k);
                auto c1 = random_vec(rng, m * n);
                auto c2 = c1;
                simd.matmul_nn_acc(a.data(), b.data(), c1.data(), m, k, n);
                ref.matmul_nn_acc(a.data(), b.data(), c2.data(), m, k, n);
                check_close(c1, c2);
                c1 = c2 = random_vec(rng, m * n);
                simd.matmul_nt_acc(a.data(), bt.data(), c1.data(), m, k, n);
                ref.matmul_nt_acc(a.data(), bt.data(), c2.data(), m, k, n);
                check_close(c1, c2);
                auto cc1 = random_vec(rng, k * n);
                auto cc2 = cc1;
                auto bb = random_vec(rng, m * n);
                simd.matmul_tn_acc(a.data(), bb.data(), cc1.data(), m, k, n);
                ref.matmul_tn_acc(a.data(), bb.data(), cc2.data(), m, k, n);
                check_close(cc1, cc2);
            }
        }
    }
    for (size_t n : {1u, 5u, 8u, 27u}) {
        auto p1 = random_vec(rng, n);
        auto g = random_vec(rng, n);
        auto p2 = p1;
        std::vector<double> m1(n, 0.1), v1(n, 0.2), m2 = m1, v2 = v1;
        simd.adam_update(p1.data(), m1.data(), v1.data(), g.data(), n, 0.01,
                         0.9, 0.999, 1e-8, 1.5, 1.2);
        ref.adam_update(p2.data(), m2.data(), v2.data(), g.data(), n, 0.01,
                        0.9, 0.999, 1e-8, 1.5, 1.2);
        check_close(p1, p2);
        check_close(m1, m2);
        check_close(v1, v2);
    }
}
