#pragma once

#include <cstddef>
#include <vector>

namespace auf {

// Small dense row-major matrix. Sized for model-dimension work (d <= a few
// hundred); sample-sized products go through the kernel table directly.
class Mat {
public:
    Mat() = default;
    Mat(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static Mat identity(size_t n) {
        Mat m(n, n);
        for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(size_t i, size_t j) { return v_[i * cols_ + j]; }
    double operator()(size_t i, size_t j) const { return v_[i * cols_ + j]; }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> v_;
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

// Lower-triangular Cholesky factor of an SPD matrix. Returns false when a
// pivot is not strictly positive.
bool cholesky(const Mat& a, Mat& l);

// ln det A given its Cholesky factor L.
double chol_logdet(const Mat& l);

// Solve A X = B given the Cholesky factor L of A.
Mat chol_solve(const Mat& l, const Mat& b);

Mat spd_inverse(const Mat& a);

// Solve A X = B for square A by LU with partial pivoting.
Mat lu_solve(Mat a, Mat b);

// Least squares min ||X beta - y||^2 via Householder QR with column
// pivoting. Rank is decided against rcond * |R_00|; dropped columns get
// zero coefficients.
struct LstsqResult {
    std::vector<double> coef;
    double rss = 0.0;
    size_t rank = 0;
};
LstsqResult lstsq(const Mat& x, const std::vector<double>& y,
                  double rcond = 1e-10);

}  // namespace auf
