#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "auf/dense.hpp"
#include "auf/scm.hpp"

namespace auf {

struct EntropyEstimate {
    double value = 0.0;        // nats
    size_t k = 1;
    size_t n = 0;
    std::vector<size_t> dims;  // variable subset used
};

// Nearest-neighbor differential-entropy estimate on the given column subset:
// H = psi(n) - psi(k) + ln V_m + (m/n) sum_i ln rho_{i,k}.
// Each column is jittered by U(-1,1) * 1e-10 * column std before the
// neighbor search so duplicate points separate; the jitter is a fixed
// function of (jitter_seed, column index), independent of the subset.
EntropyEstimate kl_entropy(const DataMatrix& data,
                           const std::vector<size_t>& subset, size_t k = 1,
                           uint64_t jitter_seed = 0);

// h(V_target | rest of lambda) = H(lambda) - H(lambda \ {target});
// for |lambda| = 1 this is the marginal entropy.
double conditional_entropy(const DataMatrix& data, size_t target,
                           const std::vector<size_t>& lambda, size_t k = 1,
                           uint64_t jitter_seed = 0);

// Memoizing wrapper around subset entropies of one dataset; columns are
// jittered once on construction. Subsets are keyed by bitmask (d <= 64).
class EntropyCache {
public:
    EntropyCache(const DataMatrix& data, size_t k, uint64_t jitter_seed = 0);

    double subset_entropy(const std::vector<size_t>& subset);
    // Computes and memoizes several subsets, fanning the heavy neighbor
    // searches across `jobs` threads. Results identical for any job count.
    void prefetch(const std::vector<std::vector<size_t>>& subsets, size_t jobs);
    size_t n() const { return n_; }
    size_t d() const { return d_; }

private:
    double compute(const std::vector<size_t>& subset) const;
    uint64_t mask_of(const std::vector<size_t>& subset) const;

    size_t n_ = 0;
    size_t d_ = 0;
    size_t k_ = 1;
    std::vector<double> cols_;  // column-major jittered copy
    std::unordered_map<uint64_t, double> memo_;
};

struct GaussianOracle {
    Mat cov;  // d x d positive definite
};

// 1/2 ln((2 pi e)^m det(cov_subset)).
double gaussian_entropy(const GaussianOracle& o,
                        const std::vector<size_t>& subset);

// I(V_j; descendants of j within `subset` | the rest) for a linear-Gaussian
// model: 1/2 ln(sigma_j^2 * Omega_jj), Omega = inverse of cov restricted to
// `subset` (which must contain j), sigma_j = noise std of node j.
double gaussian_conditional_mi(const GaussianOracle& o, size_t j,
                               const std::vector<size_t>& subset,
                               double sigma_j);

}  // namespace auf
