// AVX2 + FMA variants of the hot kernels. This translation unit is compiled
// with -mavx2 -mfma; dispatch.cpp only hands out the table when the CPU
// supports both, so no runtime feature checks are needed here.
#include "auf/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace auf::kern {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sw = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

inline double hmin(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_min_pd(lo, hi);
    __m128d sw = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_min_sd(lo, sw));
}

void sqdist_point_avx2(const double* cols, size_t n, size_t m, size_t i,
                       double* out) {
    size_t j = 0;
    for (; j + 4 <= n; j += 4) _mm256_storeu_pd(out + j, _mm256_setzero_pd());
    for (; j < n; ++j) out[j] = 0.0;
    for (size_t t = 0; t < m; ++t) {
        const double* col = cols + t * n;
        const __m256d xi = _mm256_set1_pd(col[i]);
        size_t jj = 0;
        for (; jj + 4 <= n; jj += 4) {
            const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(col + jj), xi);
            const __m256d acc = _mm256_loadu_pd(out + jj);
            _mm256_storeu_pd(out + jj, _mm256_fmadd_pd(d, d, acc));
        }
        const double xis = col[i];
        for (; jj < n; ++jj) {
            const double d = col[jj] - xis;
            out[jj] += d * d;
        }
    }
}

double min_range(const double* a, size_t lo, size_t hi) {
    double best = std::numeric_limits<double>::infinity();
    size_t j = lo;
    if (hi - lo >= 8) {
        __m256d vb = _mm256_set1_pd(best);
        for (; j + 4 <= hi; j += 4)
            vb = _mm256_min_pd(vb, _mm256_loadu_pd(a + j));
        best = hmin(vb);
    }
    for (; j < hi; ++j)
        if (a[j] < best) best = a[j];
    return best;
}

double min_excluding_avx2(const double* a, size_t n, size_t skip) {
    const double lo = min_range(a, 0, skip);
    const double hi = skip + 1 < n
                          ? min_range(a, skip + 1, n)
                          : std::numeric_limits<double>::infinity();
    return lo < hi ? lo : hi;
}

void matmul_nn_acc_avx2(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (size_t t = 0; t < k; ++t) {
            const __m256d av = _mm256_set1_pd(a[i * k + t]);
            const double* brow = b + t * n;
            size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d cv = _mm256_loadu_pd(crow + j);
                _mm256_storeu_pd(
                    crow + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv));
            }
            const double avs = a[i * k + t];
            for (; j < n; ++j) crow[j] += avs * brow[j];
        }
    }
}

void matmul_nt_acc_avx2(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            size_t t = 0;
            for (; t + 4 <= k; t += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + t),
                                      _mm256_loadu_pd(brow + t), acc);
            double s = hsum(acc);
            for (; t < k; ++t) s += arow[t] * brow[t];
            c[i * n + j] += s;
        }
    }
}

void matmul_tn_acc_avx2(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n) {
    for (size_t t = 0; t < m; ++t) {
        const double* brow = b + t * n;
        for (size_t i = 0; i < k; ++i) {
            const __m256d av = _mm256_set1_pd(a[t * k + i]);
            double* crow = c + i * n;
            size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d cv = _mm256_loadu_pd(crow + j);
                _mm256_storeu_pd(
                    crow + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv));
            }
            const double avs = a[t * k + i];
            for (; j < n; ++j) crow[j] += avs * brow[j];
        }
    }
}

double dot_avx2(const double* x, const double* y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                              acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double reduce_sum_avx2(const double* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void adam_update_avx2(double* p, double* m, double* v, const double* g,
                      size_t n, double lr, double b1, double b2, double eps,
                      double inv_corr1, double inv_corr2) {
    const __m256d vb1 = _mm256_set1_pd(b1);
    const __m256d vb2 = _mm256_set1_pd(b2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - b1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - b2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vc1 = _mm256_set1_pd(inv_corr1);
    const __m256d vc2 = _mm256_set1_pd(inv_corr2);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_fmadd_pd(vb1, mv, _mm256_mul_pd(v1mb1, gv));
        vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(v1mb2, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(mv, vc1);
        const __m256d vhat = _mm256_mul_pd(vv, vc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] * inv_corr1;
        const double vhat = v[i] * inv_corr2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops table = {
        "avx2",
        sqdist_point_avx2,
        min_excluding_avx2,
        matmul_nn_acc_avx2,
        matmul_nt_acc_avx2,
        matmul_tn_acc_avx2,
        dot_avx2,
        axpy_avx2,
        reduce_sum_avx2,
        adam_update_avx2,
    };
    return table;
}

}  // namespace auf::kern
