#include "auf/dense.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "auf/kernels.hpp"

namespace auf {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape");
    Mat c(a.rows(), b.cols());
    kern::ops().matmul_nn_acc(a.data(), b.data(), c.data(), a.rows(), a.cols(),
                              b.cols());
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

bool cholesky(const Mat& a, Mat& l) {
    const size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("cholesky: square");
    l = Mat(n, n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0)) return false;
                l(i, j) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

double chol_logdet(const Mat& l) {
    double s = 0.0;
    for (size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

Mat chol_solve(const Mat& l, const Mat& b) {
    const size_t n = l.rows();
    if (b.rows() != n) throw std::invalid_argument("chol_solve: shape");
    Mat x = b;
    // Forward: L z = b.
    for (size_t c = 0; c < x.cols(); ++c) {
        for (size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        // Backward: L^T x = z.
        for (size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return x;
}

Mat spd_inverse(const Mat& a) {
    Mat l;
    if (!cholesky(a, l)) throw std::runtime_error("spd_inverse: not SPD");
    return chol_solve(l, Mat::identity(a.rows()));
}

Mat lu_solve(Mat a, Mat b) {
    const size_t n = a.rows();
    if (a.cols() != n || b.rows() != n)
        throw std::invalid_argument("lu_solve: shape");
    std::vector<size_t> piv(n);
    for (size_t i = 0; i < n; ++i) piv[i] = i;
    for (size_t k = 0; k < n; ++k) {
        size_t p = k;
        double best = std::fabs(a(k, k));
        for (size_t i = k + 1; i < n; ++i) {
            const double v = std::fabs(a(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best == 0.0) throw std::runtime_error("lu_solve: singular");
        if (p != k) {
            for (size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            for (size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(p, j));
        }
        for (size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            a(i, k) = f;
            for (size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
            for (size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
        }
    }
    for (size_t c = 0; c < b.cols(); ++c) {
        for (size_t ii = n; ii-- > 0;) {
            double s = b(ii, c);
            for (size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * b(k, c);
            b(ii, c) = s / a(ii, ii);
        }
    }
    return b;
}

LstsqResult lstsq(const Mat& x, const std::vector<double>& y, double rcond) {
    const size_t n = x.rows();
    const size_t p = x.cols();
    if (y.size() != n) throw std::invalid_argument("lstsq: shape");
    Mat r = x;
    std::vector<double> rhs = y;
    std::vector<size_t> perm(p);
    for (size_t j = 0; j < p; ++j) perm[j] = j;
    std::vector<double> colnorm(p);
    for (size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += r(i, j) * r(i, j);
        colnorm[j] = s;
    }

    const size_t kmax = std::min(n, p);
    size_t rank = 0;
    double r00 = 0.0;
    for (size_t k = 0; k < kmax; ++k) {
        // Pivot the column with largest remaining norm to the front.
        size_t jbest = k;
        for (size_t j = k + 1; j < p; ++j)
            if (colnorm[j] > colnorm[jbest]) jbest = j;
        if (jbest != k) {
            for (size_t i = 0; i < n; ++i) std::swap(r(i, k), r(i, jbest));
            std::swap(colnorm[k], colnorm[jbest]);
            std::swap(perm[k], perm[jbest]);
        }
        double alpha = 0.0;
        for (size_t i = k; i < n; ++i) alpha += r(i, k) * r(i, k);
        alpha = std::sqrt(alpha);
        if (k == 0) r00 = alpha;
        if (alpha <= rcond * r00 || alpha == 0.0) break;
        if (r(k, k) > 0.0) alpha = -alpha;
        // Householder vector v stored in the column below the diagonal.
        std::vector<double> v(n - k);
        v[0] = r(k, k) - alpha;
        for (size_t i = k + 1; i < n; ++i) v[i - k] = r(i, k);
        double vtv = 0.0;
        for (double e : v) vtv += e * e;
        if (vtv > 0.0) {
            const double beta = 2.0 / vtv;
            for (size_t j = k; j < p; ++j) {
                double s = 0.0;
                for (size_t i = k; i < n; ++i) s += v[i - k] * r(i, j);
                s *= beta;
                for (size_t i = k; i < n; ++i) r(i, j) -= s * v[i - k];
            }
            double s = 0.0;
            for (size_t i = k; i < n; ++i) s += v[i - k] * rhs[i];
            s *= beta;
            for (size_t i = k; i < n; ++i) rhs[i] -= s * v[i - k];
        }
        r(k, k) = alpha;
        for (size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
        for (size_t j = k + 1; j < p; ++j)
            colnorm[j] = std::max(0.0, colnorm[j] - r(k, j) * r(k, j));
        ++rank;
    }

    LstsqResult out;
    out.rank = rank;
    out.coef.assign(p, 0.0);
    std::vector<double> beta(rank, 0.0);
    for (size_t ii = rank; ii-- > 0;) {
        double s = rhs[ii];
        for (size_t j = ii + 1; j < rank; ++j) s -= r(ii, j) * beta[j];
        beta[ii] = s / r(ii, ii);
    }
    for (size_t k = 0; k < rank; ++k) out.coef[perm[k]] = beta[k];
    double rss = 0.0;
    for (size_t i = rank; i < n; ++i) rss += rhs[i] * rhs[i];
    out.rss = rss;
    return out;
}

}  // namespace auf
