#include "auf/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "auf/kernels.hpp"
#include "auf/parallel.hpp"
#include "auf/special.hpp"

namespace auf {
namespace {

// Column-major jittered copy of the full dataset. cols[j*n + i] = row i of
// variable j, plus U(-1,1) * 1e-10 * std_j. A constant column has zero std
// and stays constant; the degenerate-subset check downstream catches it.
std::vector<double> jittered_columns(const DataMatrix& data,
                                     uint64_t jitter_seed) {
    std::vector<double> cols(data.n * data.d);
    for (size_t j = 0; j < data.d; ++j) {
        double sum = 0.0, sum2 = 0.0;
        for (size_t i = 0; i < data.n; ++i) {
            const double v = data.at(i, j);
            cols[j * data.n + i] = v;
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / data.n;
        const double var = std::max(0.0, sum2 / data.n - mean * mean);
        const double scale = 1e-10 * std::sqrt(var);
        Rng rng = stream(jitter_seed, "entropy_jitter", j);
        for (size_t i = 0; i < data.n; ++i)
            cols[j * data.n + i] += scale * rng.uniform(-1.0, 1.0);
    }
    return cols;
}

// Sum over points of ln(k-NN distance), on a gathered column-major subset
// buffer (subset size m, n points).
double sum_log_knn(const std::vector<double>& subset_cols, size_t n, size_t m,
                   size_t k) {
    const auto& ops = kern::ops();
    std::vector<double> sq(n);
    std::vector<double> scratch;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ops.sqdist_point(subset_cols.data(), n, m, i, sq.data());
        double rho_sq;
        if (k == 1) {
            rho_sq = ops.min_excluding(sq.data(), n, i);
        } else {
            scratch = sq;
            scratch[i] = std::numeric_limits<double>::infinity();
            std::nth_element(scratch.begin(), scratch.begin() + (k - 1),
                             scratch.end());
            rho_sq = scratch[k - 1];
        }
        if (!(rho_sq > 0.0))
            throw std::runtime_error(
                "kl_entropy: duplicate points remain after jitter");
        acc += 0.5 * std::log(rho_sq);
    }
    return acc;
}

double kl_formula(double sum_log_rho, size_t n, size_t m, size_t k) {
    return digamma(static_cast<double>(n)) - digamma(static_cast<double>(k)) +
           log_unit_ball_volume(m) +
           (static_cast<double>(m) / static_cast<double>(n)) * sum_log_rho;
}

std::vector<double> gather_subset(const std::vector<double>& cols, size_t n,
                                  const std::vector<size_t>& subset) {
    std::vector<double> out(subset.size() * n);
    for (size_t t = 0; t < subset.size(); ++t)
        std::copy_n(cols.begin() + subset[t] * n, n, out.begin() + t * n);
    return out;
}

void check_subset(const std::vector<size_t>& subset, size_t d) {
    if (subset.empty()) throw std::invalid_argument("entropy: empty subset");
    for (size_t j : subset)
        if (j >= d) throw std::out_of_range("entropy: column index");
}

}  // namespace

EntropyEstimate kl_entropy(const DataMatrix& data,
                           const std::vector<size_t>& subset, size_t k,
                           uint64_t jitter_seed) {
    check_subset(subset, data.d);
    if (data.n <= k) throw std::invalid_argument("kl_entropy: need n > k");
    if (k < 1) throw std::invalid_argument("kl_entropy: k >= 1");
    const auto cols = jittered_columns(data, jitter_seed);
    const auto sub = gather_subset(cols, data.n, subset);
    EntropyEstimate est;
    est.k = k;
    est.n = data.n;
    est.dims = subset;
    est.value =
        kl_formula(sum_log_knn(sub, data.n, subset.size(), k), data.n,
                   subset.size(), k);
    return est;
}

double conditional_entropy(const DataMatrix& data, size_t target,
                           const std::vector<size_t>& lambda, size_t k,
                           uint64_t jitter_seed) {
    if (std::find(lambda.begin(), lambda.end(), target) == lambda.end())
        throw std::invalid_argument("conditional_entropy: target not in set");
    if (lambda.size() == 1)
        return kl_entropy(data, lambda, k, jitter_seed).value;
    std::vector<size_t> rest;
    rest.reserve(lambda.size() - 1);
    for (size_t j : lambda)
        if (j != target) rest.push_back(j);
    return kl_entropy(data, lambda, k, jitter_seed).value -
           kl_entropy(data, rest, k, jitter_seed).value;
}

EntropyCache::EntropyCache(const DataMatrix& data, size_t k,
                           uint64_t jitter_seed)
    : n_(data.n), d_(data.d), k_(k) {
    if (d_ > 64) throw std::invalid_argument("EntropyCache: d <= 64");
    if (n_ <= k_) throw std::invalid_argument("EntropyCache: need n > k");
    cols_ = jittered_columns(data, jitter_seed);
}

uint64_t EntropyCache::mask_of(const std::vector<size_t>& subset) const {
    check_subset(subset, d_);
    uint64_t mask = 0;
    for (size_t j : subset) mask |= uint64_t{1} << j;
    return mask;
}

double EntropyCache::compute(const std::vector<size_t>& subset) const {
    const auto sub = gather_subset(cols_, n_, subset);
    return kl_formula(sum_log_knn(sub, n_, subset.size(), k_), n_,
                      subset.size(), k_);
}

double EntropyCache::subset_entropy(const std::vector<size_t>& subset) {
    const uint64_t mask = mask_of(subset);
    if (auto it = memo_.find(mask); it != memo_.end()) return it->second;
    const double h = compute(subset);
    memo_.emplace(mask, h);
    return h;
}

void EntropyCache::prefetch(const std::vector<std::vector<size_t>>& subsets,
                            size_t jobs) {
    std::vector<size_t> todo;
    std::vector<uint64_t> masks(subsets.size());
    for (size_t t = 0; t < subsets.size(); ++t) {
        masks[t] = mask_of(subsets[t]);
        if (memo_.find(masks[t]) == memo_.end()) todo.push_back(t);
    }
    std::vector<double> results(todo.size());
    parallel_for(todo.size(), jobs,
                 [&](size_t w) { results[w] = compute(subsets[todo[w]]); });
    for (size_t w = 0; w < todo.size(); ++w)
        memo_.emplace(masks[todo[w]], results[w]);
}

double gaussian_entropy(const GaussianOracle& o,
                        const std::vector<size_t>& subset) {
    check_subset(subset, o.cov.rows());
    const size_t m = subset.size();
    Mat sigma(m, m);
    for (size_t a = 0; a < m; ++a)
        for (size_t b = 0; b < m; ++b) sigma(a, b) = o.cov(subset[a], subset[b]);
    Mat l;
    if (!cholesky(sigma, l))
        throw std::runtime_error("gaussian_entropy: submatrix not PD");
    const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
    return 0.5 * (static_cast<double>(m) * std::log(two_pi_e) + chol_logdet(l));
}

double gaussian_conditional_mi(const GaussianOracle& o, size_t j,
                               const std::vector<size_t>& subset,
                               double sigma_j) {
    check_subset(subset, o.cov.rows());
    const auto pos_it = std::find(subset.begin(), subset.end(), j);
    if (pos_it == subset.end())
        throw std::invalid_argument("gaussian_conditional_mi: j not in subset");
    const size_t pos = static_cast<size_t>(pos_it - subset.begin());
    const size_t m = subset.size();
    Mat sigma(m, m);
    for (size_t a = 0; a < m; ++a)
        for (size_t b = 0; b < m; ++b) sigma(a, b) = o.cov(subset[a], subset[b]);
    Mat omega = spd_inverse(sigma);
    return 0.5 * std::log(sigma_j * sigma_j * omega(pos, pos));
}

}  // namespace auf
