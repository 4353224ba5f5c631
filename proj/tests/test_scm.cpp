#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "auf/scm.hpp"
#include "auf/synth.hpp"

using namespace auf;

namespace {

StructuralModel chain_model(std::vector<double> weights,
                            std::vector<double> sigmas) {
    const size_t d = sigmas.size();
    StructuralModel m;
    m.graph = Dag(d);
    m.functions.resize(d);
    m.noises.resize(d);
    for (size_t i = 0; i < d; ++i) {
        m.noises[i] = NoiseSpec{NoiseFamily::gaussian, sigmas[i], 1.0, false};
        if (i > 0) {
            m.graph.add_edge(i - 1, i);
            m.functions[i].parents = {i - 1};
            m.functions[i].impl = LinearFn{{weights[i - 1]}};
        }
    }
    return m;
}

double col_mean(const DataMatrix& d, size_t j) {
    double s = 0.0;
    for (size_t i = 0; i < d.n; ++i) s += d.at(i, j);
    return s / d.n;
}

double col_var(const DataMatrix& d, size_t j) {
    const double mu = col_mean(d, j);
    double s = 0.0;
    for (size_t i = 0; i < d.n; ++i) {
        const double v = d.at(i, j) - mu;
        s += v * v;
    }
    return s / d.n;
}

}  // namespace

TEST_CASE("topological_order basics") {
    SUBCASE("no edges: ascending") {
        const Order o = topological_order(Dag(3));
        CHECK(o.perm == std::vector<size_t>{0, 1, 2});
    }
    SUBCASE("single edge forces order") {
        Dag g(2);
        g.add_edge(1, 0);
        const Order o = topological_order(g);
        CHECK(o.perm == std::vector<size_t>{1, 0});
    }
    SUBCASE("complete chain has a unique order") {
        Dag g(3);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        const Order o = topological_order(g);
        CHECK(o.perm == std::vector<size_t>{0, 1, 2});
    }
    SUBCASE("inverse is consistent") {
        Dag g(4);
        g.add_edge(3, 1);
        g.add_edge(1, 0);
        const Order o = topological_order(g);
        for (size_t k = 0; k < 4; ++k) CHECK(o.inverse[o.perm[k]] == k);
    }
}

TEST_CASE("dag validation") {
    Dag g(3);
    CHECK_THROWS(g.add_edge(0, 0));
    g.add_edge(0, 1);
    CHECK_THROWS(g.add_edge(0, 1));
    CHECK_THROWS(g.add_edge(0, 5));
}

TEST_CASE("order_consistency: every true edge respects the order") {
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const Dag g = gen_er_dag(8, 0.4, seed);
        const Order o = topological_order(g);
        for (const auto& [i, j] : g.edges()) CHECK(o.inverse[i] < o.inverse[j]);
    }
}

TEST_CASE("descendants") {
    Dag chain(3);
    chain.add_edge(0, 1);
    chain.add_edge(1, 2);
    CHECK(descendants(chain, 0) == std::vector<size_t>{1, 2});
    CHECK(descendants(chain, 2).empty());
    Dag diamond(4);
    diamond.add_edge(0, 1);
    diamond.add_edge(0, 2);
    diamond.add_edge(1, 3);
    diamond.add_edge(2, 3);
    CHECK(descendants(diamond, 0) == std::vector<size_t>{1, 2, 3});
    CHECK_THROWS(descendants(chain, 9));
}

TEST_CASE("sample_observational matches analytic moments") {
    SUBCASE("single standard normal node") {
        const auto m = chain_model({}, {1.0});
        const DataMatrix d = sample_observational(m, 100000, 42);
        CHECK(col_mean(d, 0) >= -0.02);
        CHECK(col_mean(d, 0) <= 0.02);
        CHECK(col_var(d, 0) >= 0.97);
        CHECK(col_var(d, 0) <= 1.03);
    }
    SUBCASE("child of a unit-weight edge has variance 2") {
        const auto m = chain_model({1.0}, {1.0, 1.0});
        const DataMatrix d = sample_observational(m, 100000, 7);
        CHECK(col_var(d, 1) == doctest::Approx(2.0).epsilon(0.05));
    }
    SUBCASE("n = 0 is rejected") {
        const auto m = chain_model({}, {1.0});
        CHECK_THROWS(sample_observational(m, 0, 1));
    }
    SUBCASE("bit-for-bit reproducible") {
        const auto m = chain_model({1.0}, {1.0, 1.0});
        const DataMatrix a = sample_observational(m, 500, 11);
        const DataMatrix b = sample_observational(m, 500, 11);
        CHECK(a.values == b.values);
        const DataMatrix c = sample_observational(m, 500, 12);
        CHECK(a.values != c.values);
    }
}

TEST_CASE("noise families sample and invert correctly") {
    Rng rng(5);
    for (NoiseSpec s : {NoiseSpec{NoiseFamily::gaussian, 1.3, 1.0, false},
                        NoiseSpec{NoiseFamily::beta, 2.0, 3.0, false},
                        NoiseSpec{NoiseFamily::exponential, 0.8, 1.0, false}}) {
        double sum = 0.0;
        const size_t n = 200000;
        for (size_t i = 0; i < n; ++i) sum += s.sample(rng);
        CHECK(std::fabs(sum / n - s.mean_raw()) < 0.02);
        // Half the mass falls below the median quantile.
        const double med = s.quantile(0.5);
        size_t below = 0;
        Rng rng2(6);
        for (size_t i = 0; i < 20000; ++i)
            if (s.sample(rng2) < med) ++below;
        CHECK(std::fabs(static_cast<double>(below) / 20000 - 0.5) < 0.02);
        // Centering shifts the mean to zero.
        NoiseSpec centered = s;
        centered.centering = true;
        double csum = 0.0;
        Rng rng3(7);
        for (size_t i = 0; i < n; ++i) csum += centered.sample(rng3);
        CHECK(std::fabs(csum / n) < 0.02);
    }
}

namespace {

AufTask two_node_task() {
    // chain 0 -> 1 with node 0 alterable-intermediate and node 1 outcome.
    AufTask t;
    t.roles = {Role::intermediate, Role::outcome};
    t.alterable = {0};
    t.domain = {{-10.0, 10.0}};
    t.region_m = Mat(2, 1);
    t.region_m(0, 0) = 1.0;
    t.region_m(1, 0) = -1.0;
    t.region_d = {1.0, 1.0};
    return t;
}

}  // namespace

TEST_CASE("sample_interventional") {
    const auto m = chain_model({1.0}, {1.0, 1.0});
    const AufTask t = two_node_task();
    SUBCASE("forcing the parent moves the child mean") {
        const size_t n = 20000;
        const DataMatrix d = sample_interventional(m, t, {}, {5.0}, n, 3);
        for (size_t i = 0; i < n; ++i) CHECK(d.at(i, 0) == 5.0);
        CHECK(std::fabs(col_mean(d, 1) - 5.0) < 4.0 / std::sqrt(n));
    }
    SUBCASE("decision arity is checked") {
        CHECK_THROWS(sample_interventional(m, t, {}, {1.0, 2.0}, 10, 3));
        CHECK_THROWS(sample_interventional(m, t, {0.5}, {1.0}, 10, 3));
    }
    SUBCASE("intervening on a sink leaves other columns observational") {
        AufTask sink_task;
        sink_task.roles = {Role::outcome, Role::intermediate};
        sink_task.alterable = {1};
        sink_task.domain = {{-10.0, 10.0}};
        sink_task.region_m = Mat(0, 1);
        const size_t n = 10000;
        const DataMatrix obs = sample_observational(m, n, 21);
        const DataMatrix post =
            sample_interventional(m, sink_task, {}, {3.0}, n, 22);
        // Two-sample z-test on the non-descendant column, alpha = 0.01.
        const double mu1 = col_mean(obs, 0), mu2 = col_mean(post, 0);
        const double se =
            std::sqrt(col_var(obs, 0) / n + col_var(post, 0) / n);
        CHECK(std::fabs(mu1 - mu2) / se < 2.576);
    }
}

TEST_CASE("AufTask role constraint") {
    // 0 -> 1 where 0 is intermediate and 1 is context: forbidden.
    Dag g(2);
    g.add_edge(0, 1);
    AufTask t;
    t.roles = {Role::intermediate, Role::context};
    t.region_m = Mat(0, 0);
    CHECK_THROWS(t.validate(g));
    // Context parents of context nodes are fine.
    AufTask ok;
    ok.roles = {Role::context, Role::context};
    ok.region_m = Mat(0, 0);
    CHECK_NOTHROW(ok.validate(g));
}

TEST_CASE("linear gaussian covariance of a chain") {
    // V0 ~ N(0,1), V1 = V0 + N(0,1): Sigma = [[1,1],[1,2]].
    const auto m = chain_model({1.0}, {1.0, 1.0});
    const Mat cov = linear_gaussian_covariance(m);
    CHECK(cov(0, 0) == doctest::Approx(1.0));
    CHECK(cov(0, 1) == doctest::Approx(1.0));
    CHECK(cov(1, 0) == doctest::Approx(1.0));
    CHECK(cov(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("interventional moments match Monte Carlo") {
    const auto m = chain_model({0.8, -1.2}, {1.0, 0.7, 0.5});
    const auto an = linear_gaussian_interventional(m, {1}, {2.0});
    CHECK(an.mean[1] == doctest::Approx(2.0));
    CHECK(an.mean[2] == doctest::Approx(-2.4));
    CHECK(an.cov(1, 1) == doctest::Approx(0.0));
    AufTask t;
    t.roles = {Role::intermediate, Role::intermediate, Role::outcome};
    t.alterable = {1};
    t.domain = {{-10.0, 10.0}};
    t.region_m = Mat(0, 1);
    const size_t n = 50000;
    const DataMatrix d = sample_interventional(m, t, {}, {2.0}, n, 17);
    CHECK(col_mean(d, 2) == doctest::Approx(an.mean[2]).epsilon(0.02));
    CHECK(col_var(d, 2) == doctest::Approx(an.cov(2, 2)).epsilon(0.05));
    CHECK(col_var(d, 0) == doctest::Approx(an.cov(0, 0)).epsilon(0.05));
}

TEST_CASE("model json round trip preserves function outputs") {
    OrderBenchConfig cfg;
    cfg.d = 6;
    cfg.linearity = 0.5;
    cfg.n = 400;
    cfg.n_anchor = 64;
    const StructuralModel m = gen_order_task(cfg, 99);
    const StructuralModel back = model_from_json(model_to_json(m));
    CHECK(back.dim() == m.dim());
    CHECK(back.graph.edges() == m.graph.edges());
    Rng rng(4);
    for (size_t i = 0; i < m.dim(); ++i) {
        const size_t np = m.functions[i].parents.size();
        std::vector<double> pa(np);
        for (int rep = 0; rep < 5; ++rep) {
            for (auto& v : pa) v = rng.uniform(-2.0, 2.0);
            CHECK(back.functions[i].eval(pa.data()) ==
                  doctest::Approx(m.functions[i].eval(pa.data()))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("task json round trip") {
    AufBenchConfig cfg;
    cfg.d = 10;
    cfg.n = 200;
    auto [m, t] = gen_auf_task(cfg, 5);
    const AufTask back = task_from_json(task_to_json(t));
    CHECK(back.roles == t.roles);
    CHECK(back.alterable == t.alterable);
    CHECK(back.domain == t.domain);
    CHECK(back.region_d == t.region_d);
    REQUIRE(back.region_m.rows() == t.region_m.rows());
    for (size_t i = 0; i < t.region_m.rows(); ++i)
        for (size_t j = 0; j < t.region_m.cols(); ++j)
            CHECK(back.region_m(i, j) == t.region_m(i, j));
    CHECK_NOTHROW(back.validate(m.graph));
}
