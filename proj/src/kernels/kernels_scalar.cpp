#include "auf/kernels.hpp"

#include <cmath>
#include <limits>

namespace auf::kern {
namespace {

void sqdist_point_scalar(const double* cols, size_t n, size_t m, size_t i,
                         double* out) {
    for (size_t j = 0; j < n; ++j) out[j] = 0.0;
    for (size_t t = 0; t < m; ++t) {
        const double* col = cols + t * n;
        const double xi = col[i];
        for (size_t j = 0; j < n; ++j) {
            const double d = col[j] - xi;
            out[j] += d * d;
        }
    }
}

double min_excluding_scalar(const double* a, size_t n, size_t skip) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < skip; ++j)
        if (a[j] < best) best = a[j];
    for (size_t j = skip + 1; j < n; ++j)
        if (a[j] < best) best = a[j];
    return best;
}

void matmul_nn_acc_scalar(const double* a, const double* b, double* c,
                          size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        for (size_t t = 0; t < k; ++t) {
            const double av = a[i * k + t];
            const double* brow = b + t * n;
            double* crow = c + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_acc_scalar(const double* a, const double* b, double* c,
                          size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            c[i * n + j] += acc;
        }
    }
}

void matmul_tn_acc_scalar(const double* a, const double* b, double* c,
                          size_t m, size_t k, size_t n) {
    for (size_t t = 0; t < m; ++t) {
        const double* brow = b + t * n;
        for (size_t i = 0; i < k; ++i) {
            const double av = a[t * k + i];
            double* crow = c + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

double dot_scalar(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double reduce_sum_scalar(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void adam_update_scalar(double* p, double* m, double* v, const double* g,
                        size_t n, double lr, double b1, double b2, double eps,
                        double inv_corr1, double inv_corr2) {
    for (size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] * inv_corr1;
        const double vhat = v[i] * inv_corr2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        "scalar",
        sqdist_point_scalar,
        min_excluding_scalar,
        matmul_nn_acc_scalar,
        matmul_nt_acc_scalar,
        matmul_tn_acc_scalar,
        dot_scalar,
        axpy_scalar,
        reduce_sum_scalar,
        adam_update_scalar,
    };
    return table;
}

}  // namespace auf::kern
