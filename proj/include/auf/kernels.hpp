#pragma once

#include <cstddef>

namespace auf::kern {

// Data-parallel inner loops used by the entropy estimator and the autodiff
// engine. Every kernel has a scalar reference implementation and may have
// architecture-specific variants; the active table is chosen once at runtime
// from CPU features (see ops()). Variants are equivalence-tested against the
// scalar reference.
//
// Matrix arguments are dense row-major. The matmul kernels accumulate into C,
// callers zero C when they want a plain product.
struct Ops {
    const char* name;

    // out[j] = squared Euclidean distance between points i and j, where the
    // points live in `cols`, a column-major n x m buffer (cols[t*n + j] is
    // coordinate t of point j).
    void (*sqdist_point)(const double* cols, size_t n, size_t m, size_t i,
                         double* out);

    // min over a[j], j != skip; n >= 2.
    double (*min_excluding)(const double* a, size_t n, size_t skip);

    // C(m x n) += A(m x k) * B(k x n)
    void (*matmul_nn_acc)(const double* a, const double* b, double* c,
                          size_t m, size_t k, size_t n);
    // C(m x n) += A(m x k) * B(n x k)^T
    void (*matmul_nt_acc)(const double* a, const double* b, double* c,
                          size_t m, size_t k, size_t n);
    // C(k x n) += A(m x k)^T * B(m x n)
    void (*matmul_tn_acc)(const double* a, const double* b, double* c,
                          size_t m, size_t k, size_t n);

    double (*dot)(const double* x, const double* y, size_t n);
    void (*axpy)(double alpha, const double* x, double* y, size_t n);
    double (*reduce_sum)(const double* x, size_t n);

    // Bias-corrected Adam update on one flat parameter block.
    // p -= lr * mhat / (sqrt(vhat) + eps), with mhat/vhat using the
    // precomputed correction factors inv_corr1 = 1/(1-b1^t), inv_corr2.
    void (*adam_update)(double* p, double* m, double* v, const double* g,
                        size_t n, double lr, double b1, double b2, double eps,
                        double inv_corr1, double inv_corr2);
};

// Active kernel table. Selected on first use: AVX2+FMA when the CPU supports
// them, unless AUF_KERNELS=scalar is set in the environment.
const Ops& ops();

// Scalar reference table (always available; used by equivalence tests).
const Ops& scalar_ops();

// AVX2+FMA table. Only safe to call through when the CPU has both features;
// ops() handles that check.
const Ops& avx2_ops();

}  // namespace auf::kern
