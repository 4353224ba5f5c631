#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "auf/entropy.hpp"
#include "auf/rng.hpp"
#include "auf/scm.hpp"
#include "auf/synth.hpp"

using namespace auf;

namespace {

constexpr double kGaussianEntropy = 1.4189385332046727;  // 0.5 ln(2 pi e)

DataMatrix gaussian_data(size_t n, size_t d, uint64_t seed) {
    DataMatrix out(n, d);
    Rng rng(seed);
    for (auto& v : out.values) v = rng.normal();
    return out;
}

}  // namespace

TEST_CASE("kl_entropy recovers known marginal entropies") {
    SUBCASE("standard normal") {
        const DataMatrix d = gaussian_data(10000, 1, 42);
        const EntropyEstimate e = kl_entropy(d, {0});
        CHECK(e.value > 1.35);
        CHECK(e.value < 1.49);
        CHECK(e.n == 10000);
        CHECK(e.k == 1);
        CHECK(e.dims == std::vector<size_t>{0});
    }
    SUBCASE("unit uniform has zero entropy") {
        DataMatrix d(10000, 1);
        Rng rng(7);
        for (auto& v : d.values) v = rng.uniform();
        const EntropyEstimate e = kl_entropy(d, {0});
        CHECK(std::fabs(e.value) < 0.06);
    }
    SUBCASE("scaling shifts entropy by log of the scale") {
        DataMatrix d = gaussian_data(6000, 1, 9);
        const double h1 = kl_entropy(d, {0}).value;
        for (auto& v : d.values) v *= 3.0;
        const double h3 = kl_entropy(d, {0}).value;
        CHECK(h3 - h1 == doctest::Approx(std::log(3.0)).epsilon(0.05));
    }
    SUBCASE("k = 3 estimator agrees on the same data") {
        const DataMatrix d = gaussian_data(4000, 1, 5);
        const EntropyEstimate e = kl_entropy(d, {0}, 3);
        CHECK(e.value > 1.3);
        CHECK(e.value < 1.55);
    }
    SUBCASE("independent columns are additive") {
        const DataMatrix d = gaussian_data(4000, 2, 11);
        const double hx = kl_entropy(d, {0}).value;
        const double hy = kl_entropy(d, {1}).value;
        const double hxy = kl_entropy(d, {0, 1}).value;
        CHECK(std::fabs(hxy - hx - hy) < 0.1);
    }
    SUBCASE("constant column cannot be separated") {
        DataMatrix d(500, 1);
        for (auto& v : d.values) v = 2.5;
        // Zero spread means zero jitter scale, so ties persist.
        CHECK_THROWS(kl_entropy(d, {0}));
    }
    SUBCASE("near-duplicate data is separated by jitter") {
        DataMatrix d(1000, 1);
        Rng rng(3);
        for (auto& v : d.values) v = std::floor(rng.uniform() * 10.0);
        CHECK_NOTHROW(kl_entropy(d, {0}));
    }
    SUBCASE("argument validation") {
        const DataMatrix d = gaussian_data(100, 2, 1);
        CHECK_THROWS(kl_entropy(d, {}));
        CHECK_THROWS(kl_entropy(d, {5}));
        CHECK_THROWS(kl_entropy(d, {0}, 100));
    }
}

TEST_CASE("conditional_entropy") {
    const DataMatrix d = gaussian_data(8000, 2, 13);
    SUBCASE("independent condition leaves the marginal unchanged") {
        const double cond = conditional_entropy(d, 0, {0, 1});
        CHECK(std::fabs(cond - kGaussianEntropy) < 0.1);
    }
    SUBCASE("strong dependence drops the conditional entropy") {
        DataMatrix dep = d;
        for (size_t i = 0; i < dep.n; ++i)
            dep.at(i, 1) = dep.at(i, 0) + 0.1 * dep.at(i, 1);
        const double cond = conditional_entropy(dep, 1, {0, 1});
        // True value: 0.5 ln(2 pi e * 0.01) = kGaussianEntropy + ln(0.1).
        CHECK(cond < kGaussianEntropy + std::log(0.1) + 0.35);
    }
    SUBCASE("singleton lambda is the marginal") {
        CHECK(conditional_entropy(d, 0, {0}) == kl_entropy(d, {0}).value);
    }
    SUBCASE("target must belong to lambda") {
        CHECK_THROWS(conditional_entropy(d, 0, {1}));
    }
}

TEST_CASE("EntropyCache") {
    const DataMatrix d = gaussian_data(1500, 4, 21);
    EntropyCache cache(d, 1);
    SUBCASE("matches the direct estimator bit for bit") {
        for (const auto& s : std::vector<std::vector<size_t>>{
                 {0}, {2}, {0, 1}, {1, 3}, {0, 1, 2, 3}})
            CHECK(cache.subset_entropy(s) == kl_entropy(d, s).value);
    }
    SUBCASE("subset order does not matter") {
        CHECK(cache.subset_entropy({2, 0}) == cache.subset_entropy({0, 2}));
    }
    SUBCASE("prefetch across threads matches sequential values") {
        const std::vector<std::vector<size_t>> subsets = {
            {0}, {1}, {2}, {3}, {0, 1}, {0, 2}, {0, 3}, {1, 2}, {2, 3}};
        EntropyCache par(d, 1);
        par.prefetch(subsets, 4);
        EntropyCache seq(d, 1);
        for (const auto& s : subsets)
            CHECK(par.subset_entropy(s) == seq.subset_entropy(s));
    }
    SUBCASE("rejects wide matrices") {
        CHECK_THROWS(EntropyCache(DataMatrix(10, 65), 1));
    }
}

TEST_CASE("gaussian_entropy closed forms") {
    GaussianOracle o;
    o.cov = Mat(2, 2);
    o.cov(0, 0) = 1.0;
    o.cov(1, 1) = 9.0;
    SUBCASE("unit variance") {
        CHECK(gaussian_entropy(o, {0}) ==
              doctest::Approx(kGaussianEntropy).epsilon(1e-12));
    }
    SUBCASE("variance scales the entropy by half its log") {
        CHECK(gaussian_entropy(o, {1}) ==
              doctest::Approx(kGaussianEntropy + std::log(3.0)).epsilon(1e-12));
    }
    SUBCASE("correlated pair") {
        GaussianOracle c;
        c.cov = Mat(2, 2);
        c.cov(0, 0) = c.cov(1, 1) = 1.0;
        c.cov(0, 1) = c.cov(1, 0) = 0.5;
        const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
        CHECK(gaussian_entropy(c, {0, 1}) ==
              doctest::Approx(0.5 * std::log(two_pi_e * two_pi_e * 0.75))
                  .epsilon(1e-12));
    }
    SUBCASE("subset order is irrelevant") {
        GaussianOracle c;
        c.cov = Mat(3, 3);
        c.cov(0, 0) = 1.0;
        c.cov(1, 1) = 2.0;
        c.cov(2, 2) = 3.0;
        c.cov(0, 1) = c.cov(1, 0) = 0.3;
        CHECK(gaussian_entropy(c, {2, 0}) ==
              doctest::Approx(gaussian_entropy(c, {0, 2})).epsilon(1e-14));
    }
    SUBCASE("rejects a non positive definite submatrix") {
        GaussianOracle bad;
        bad.cov = Mat(2, 2);
        bad.cov(0, 0) = bad.cov(1, 1) = 1.0;
        bad.cov(0, 1) = bad.cov(1, 0) = 1.5;
        CHECK_THROWS(gaussian_entropy(bad, {0, 1}));
    }
}

namespace {

StructuralModel chain2(double w, double s0, double s1) {
    StructuralModel m;
    m.graph = Dag(2);
    m.graph.add_edge(0, 1);
    m.functions.resize(2);
    m.noises = {NoiseSpec{NoiseFamily::gaussian, s0, 1.0, false},
                NoiseSpec{NoiseFamily::gaussian, s1, 1.0, false}};
    m.functions[1].parents = {0};
    m.functions[1].impl = LinearFn{{w}};
    return m;
}

// Random linear-Gaussian model over d nodes for property checks.
StructuralModel random_lg(size_t d, uint64_t seed) {
    StructuralModel m;
    m.graph = gen_er_dag(d, 0.5, seed);
    m.functions.resize(d);
    m.noises.resize(d);
    Rng rng(mix_seed(seed, 0xabc));
    for (size_t i = 0; i < d; ++i) {
        m.noises[i] =
            NoiseSpec{NoiseFamily::gaussian, rng.uniform(0.5, 1.5), 1.0, false};
        const auto& pa = m.graph.parents(i);
        m.functions[i].parents = pa;
        if (!pa.empty()) {
            LinearFn f;
            for (size_t t = 0; t < pa.size(); ++t)
                f.weights.push_back(rng.uniform(-1.0, 1.0));
            m.functions[i].impl = f;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("gaussian_conditional_mi") {
    SUBCASE("a sink carries no information about its descendants") {
        const StructuralModel m = chain2(1.0, 1.0, 1.0);
        GaussianOracle o{linear_gaussian_covariance(m)};
        CHECK(gaussian_conditional_mi(o, 1, {0, 1}, 1.0) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("unit chain root carries half log two") {
        const StructuralModel m = chain2(1.0, 1.0, 1.0);
        GaussianOracle o{linear_gaussian_covariance(m)};
        CHECK(gaussian_conditional_mi(o, 0, {0, 1}, 1.0) ==
              doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("matches the entropy-difference identity") {
        // I = h(V_j given only its noise sources) - h(V_j given the rest)
        //   = 0.5 ln(2 pi e sigma_j^2) - [H(S) - H(S minus j)].
        for (uint64_t seed = 0; seed < 20; ++seed) {
            const StructuralModel m = random_lg(6, seed);
            GaussianOracle o{linear_gaussian_covariance(m)};
            const std::vector<size_t> s = {0, 1, 2, 3, 4, 5};
            for (size_t j = 0; j < 6; ++j) {
                std::vector<size_t> rest;
                for (size_t t = 0; t < 6; ++t)
                    if (t != j) rest.push_back(t);
                const double sigma = m.noises[j].a;
                const double hj_noise =
                    0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e *
                                   sigma * sigma);
                const double hj_cond =
                    gaussian_entropy(o, s) - gaussian_entropy(o, rest);
                const double mi = gaussian_conditional_mi(o, j, s, sigma);
                CHECK(mi == doctest::Approx(hj_noise - hj_cond).epsilon(1e-10));
            }
        }
    }
    SUBCASE("is nonnegative on topological prefixes") {
        for (uint64_t seed = 0; seed < 20; ++seed) {
            const StructuralModel m = random_lg(7, seed + 100);
            GaussianOracle o{linear_gaussian_covariance(m)};
            const Order topo = topological_order(m.graph);
            for (size_t len = 1; len <= 7; ++len) {
                std::vector<size_t> prefix(topo.perm.begin(),
                                           topo.perm.begin() + len);
                for (size_t j : prefix)
                    CHECK(gaussian_conditional_mi(o, j, prefix,
                                                  m.noises[j].a) >= -1e-9);
            }
        }
    }
    SUBCASE("j must be a member of the subset") {
        const StructuralModel m = chain2(1.0, 1.0, 1.0);
        GaussianOracle o{linear_gaussian_covariance(m)};
        CHECK_THROWS(gaussian_conditional_mi(o, 1, {0}, 1.0));
    }
}

TEST_CASE("empirical estimate approaches the gaussian oracle") {
    // Joint entropy of a simulated chain vs the closed form.
    const StructuralModel m = chain2(0.8, 1.0, 0.6);
    GaussianOracle o{linear_gaussian_covariance(m)};
    const double truth = gaussian_entropy(o, {0, 1});
    const DataMatrix d = sample_observational(m, 6000, 31);
    const double est = kl_entropy(d, {0, 1}).value;
    CHECK(std::fabs(est - truth) < 0.1);
}
