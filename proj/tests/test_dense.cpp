#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "auf/dense.hpp"
#include "auf/rng.hpp"

using auf::Mat;

namespace {

Mat random_mat(auf::Rng& rng, size_t r, size_t c) {
    Mat m(r, c);
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    return m;
}

Mat random_spd(auf::Rng& rng, size_t n) {
    Mat a = random_mat(rng, n, n);
    Mat s = auf::matmul(a, auf::transpose(a));
    for (size_t i = 0; i < n; ++i) s(i, i) += n;
    return s;
}

void check_identity(const Mat& m, double tol) {
    for (size_t i = 0; i < m.rows(); ++i)
        for (size_t j = 0; j < m.cols(); ++j)
            CHECK(m(i, j) ==
                  doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1).scale(tol));
}

}  // namespace

TEST_CASE("matmul small example") {
    Mat a(2, 3), b(3, 2);
    double av = 1.0;
    for (size_t i = 0; i < 2; ++i)
        for (size_t j = 0; j < 3; ++j) a(i, j) = av++;
    double bv = 1.0;
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 2; ++j) b(i, j) = bv++;
    Mat c = auf::matmul(a, b);
    CHECK(c(0, 0) == 22.0);
    CHECK(c(0, 1) == 28.0);
    CHECK(c(1, 0) == 49.0);
    CHECK(c(1, 1) == 64.0);
}

TEST_CASE("cholesky of a known matrix") {
    Mat a(2, 2);
    a(0, 0) = 4.0;
    a(0, 1) = a(1, 0) = 2.0;
    a(1, 1) = 3.0;
    Mat l;
    REQUIRE(auf::cholesky(a, l));
    CHECK(l(0, 0) == doctest::Approx(2.0));
    CHECK(l(1, 0) == doctest::Approx(1.0));
    CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(l(0, 1) == 0.0);
    // det = 4*3 - 4 = 8.
    CHECK(auf::chol_logdet(l) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("cholesky rejects indefinite input") {
    Mat a(2, 2);
    a(0, 0) = 1.0;
    a(0, 1) = a(1, 0) = 2.0;
    a(1, 1) = 1.0;
    Mat l;
    CHECK_FALSE(auf::cholesky(a, l));
}

TEST_CASE("chol_solve and spd_inverse roundtrip") {
    auf::Rng rng(77);
    for (size_t n : {1u, 2u, 5u, 12u}) {
        Mat a = random_spd(rng, n);
        Mat l;
        REQUIRE(auf::cholesky(a, l));
        Mat b = random_mat(rng, n, 3);
        Mat x = auf::chol_solve(l, b);
        Mat ax = auf::matmul(a, x);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < 3; ++j)
                CHECK(ax(i, j) == doctest::Approx(b(i, j)).epsilon(1e-9));
        check_identity(auf::matmul(a, auf::spd_inverse(a)), 1e-9);
    }
}

TEST_CASE("lu_solve handles non-symmetric systems") {
    auf::Rng rng(78);
    for (size_t n : {1u, 3u, 8u}) {
        Mat a = random_mat(rng, n, n);
        for (size_t i = 0; i < n; ++i) a(i, i) += 3.0;
        Mat b = random_mat(rng, n, 2);
        Mat x = auf::lu_solve(a, b);
        Mat ax = auf::matmul(a, x);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < 2; ++j)
                CHECK(ax(i, j) == doctest::Approx(b(i, j)).epsilon(1e-10));
    }
    // A system needing a row swap.
    Mat a(2, 2);
    a(0, 0) = 0.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 0.0;
    Mat b(2, 1);
    b(0, 0) = 5.0;
    b(1, 0) = 7.0;
    Mat x = auf::lu_solve(a, b);
    CHECK(x(0, 0) == doctest::Approx(7.0));
    CHECK(x(1, 0) == doctest::Approx(5.0));
}

TEST_CASE("lstsq recovers exact coefficients") {
    auf::Rng rng(79);
    const size_t n = 50, p = 4;
    Mat x = random_mat(rng, n, p);
    std::vector<double> beta = {1.5, -2.0, 0.25, 3.0};
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < p; ++j) s += x(i, j) * beta[j];
        y[i] = s;
    }
    auto res = auf::lstsq(x, y);
    CHECK(res.rank == p);
    for (size_t j = 0; j < p; ++j)
        CHECK(res.coef[j] == doctest::Approx(beta[j]).epsilon(1e-9));
    CHECK(res.rss == doctest::Approx(0.0).epsilon(1).scale(1e-16));
}

TEST_CASE("lstsq matches normal equations with noise") {
    auf::Rng rng(80);
    const size_t n = 80, p = 3;
    Mat x = random_mat(rng, n, p);
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i)
        y[i] = 2.0 * x(i, 0) - x(i, 2) + 0.1 * rng.normal();
    auto res = auf::lstsq(x, y);
    // Normal equations: (X^T X) beta = X^T y.
    Mat xtx(p, p);
    Mat xty(p, 1);
    for (size_t a = 0; a < p; ++a) {
        for (size_t b = 0; b < p; ++b) {
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += x(i, a) * x(i, b);
            xtx(a, b) = s;
        }
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += x(i, a) * y[i];
        xty(a, 0) = s;
    }
    Mat beta = auf::lu_solve(xtx, xty);
    for (size_t j = 0; j < p; ++j)
        CHECK(res.coef[j] == doctest::Approx(beta(j, 0)).epsilon(1e-8));
    // RSS agrees with the explicit residual.
    double rss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (size_t j = 0; j < p; ++j) pred += x(i, j) * res.coef[j];
        rss += (y[i] - pred) * (y[i] - pred);
    }
    CHECK(res.rss == doctest::Approx(rss).epsilon(1e-8));
}

TEST_CASE("lstsq detects rank deficiency") {
    auf::Rng rng(81);
    const size_t n = 40;
    Mat x(n, 3);
    for (size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1.0, 1.0);
        x(i, 1) = 2.0 * x(i, 0);  // exact duplicate direction
        x(i, 2) = rng.uniform(-1.0, 1.0);
    }
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = x(i, 0) + x(i, 2);
    auto res = auf::lstsq(x, y);
    CHECK(res.rank == 2);
    CHECK(res.rss == doctest::Approx(0.0).epsilon(1).scale(1e-14));
    // Fitted values still reproduce y.
    for (size_t i = 0; i < n; ++i) {
        double pred = 0.0;
        for (size_t j = 0; j < 3; ++j) pred += x(i, j) * res.coef[j];
        CHECK(pred == doctest::Approx(y[i]).epsilon(1e-9));
    }
}
