#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "auf/scm.hpp"
#include "auf/synth.hpp"

using namespace auf;

TEST_CASE("gen_er_dag") {
    SUBCASE("p = 1 gives the complete dag") {
        const Dag g = gen_er_dag(3, 1.0, 0);
        CHECK(g.num_edges() == 3);
        CHECK_NOTHROW(topological_order(g));
    }
    SUBCASE("single node has no edges") {
        CHECK(gen_er_dag(1, 0.5, 0).num_edges() == 0);
    }
    SUBCASE("edge count is binomial with mean p * d(d-1)/2") {
        double total = 0.0;
        const int reps = 2000;
        for (int s = 0; s < reps; ++s)
            total += gen_er_dag(10, 0.3, static_cast<uint64_t>(s)).num_edges();
        CHECK(std::fabs(total / reps - 13.5) < 0.5);
    }
    SUBCASE("rejects bad arguments") {
        CHECK_THROWS(gen_er_dag(0, 0.5, 0));
        CHECK_THROWS(gen_er_dag(3, 0.0, 0));
        CHECK_THROWS(gen_er_dag(3, 1.5, 0));
    }
}

TEST_CASE("gen_linear_fn coefficient ranges") {
    SUBCASE("banded draws keep magnitudes inside the band") {
        for (uint64_t s = 0; s < 50; ++s) {
            const LinearFn f =
                gen_linear_fn(4, s, CoeffRange::banded(0.25, 1.0));
            for (double w : f.weights) {
                CHECK(std::fabs(w) >= 0.25);
                CHECK(std::fabs(w) <= 1.0);
            }
        }
    }
    SUBCASE("banded draws use both signs") {
        size_t neg = 0, total = 0;
        for (uint64_t s = 0; s < 50; ++s)
            for (double w :
                 gen_linear_fn(4, s, CoeffRange::banded(0.25, 1.0)).weights) {
                ++total;
                if (w < 0) ++neg;
            }
        CHECK(neg > total / 4);
        CHECK(neg < 3 * total / 4);
    }
    SUBCASE("degenerate range pins the weight") {
        const LinearFn f = gen_linear_fn(1, 7, CoeffRange::plain(0.5, 0.5));
        CHECK(f.weights[0] == 0.5);
        StructuralFn sf;
        sf.parents = {0};
        sf.impl = f;
        const double x = 2.0;
        CHECK(sf.eval(&x) == 1.0);
    }
    SUBCASE("plain draws stay inside [lo, hi)") {
        for (uint64_t s = 0; s < 50; ++s)
            for (double w :
                 gen_linear_fn(3, s, CoeffRange::plain(-1.0, 1.0)).weights) {
                CHECK(w >= -1.0);
                CHECK(w < 1.0);
            }
    }
    SUBCASE("rejects zero parents") {
        CHECK_THROWS(gen_linear_fn(0, 0, CoeffRange::plain(0, 1)));
    }
}

TEST_CASE("gen_gp_fn") {
    Rng rng(12345);
    Mat anchors(32, 2);
    for (size_t a = 0; a < 32; ++a)
        for (size_t t = 0; t < 2; ++t) anchors(a, t) = rng.uniform(-2.0, 2.0);

    SUBCASE("deterministic in the seed") {
        const GpFn f1 = gen_gp_fn(anchors, 9);
        const GpFn f2 = gen_gp_fn(anchors, 9);
        CHECK(f1.alpha == f2.alpha);
        const GpFn f3 = gen_gp_fn(anchors, 10);
        CHECK(f1.alpha != f3.alpha);
    }
    SUBCASE("marginal variance at an anchor is the unit prior variance") {
        StructuralFn sf;
        sf.parents = {0, 1};
        double query[2] = {anchors(0, 0), anchors(0, 1)};
        double sum = 0.0, sum2 = 0.0;
        const int reps = 800;
        for (int s = 0; s < reps; ++s) {
            sf.impl = gen_gp_fn(anchors, static_cast<uint64_t>(s));
            const double v = sf.eval(query);
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / reps;
        const double var = sum2 / reps - mean * mean;
        CHECK(std::fabs(mean) < 0.15);
        CHECK(var > 0.85);
        CHECK(var < 1.15);
    }
    SUBCASE("decays to zero far from the anchors") {
        StructuralFn sf;
        sf.parents = {0, 1};
        sf.impl = gen_gp_fn(anchors, 3);
        double far[2] = {100.0, 100.0};
        CHECK(std::fabs(sf.eval(far)) < 1e-10);
    }
    SUBCASE("rejects empty anchors") {
        CHECK_THROWS(gen_gp_fn(Mat(0, 2), 0));
    }
}

TEST_CASE("gen_mlp_fn") {
    const MlpFn f = gen_mlp_fn(3, 21, 8);
    CHECK(f.in == 3);
    CHECK(f.hidden == 8);
    CHECK(f.w1.size() == 24);
    CHECK(f.w2.size() == 64);
    CHECK(f.w3.size() == 8);
    SUBCASE("weights live in the signed band") {
        for (const auto* ws : {&f.w1, &f.w2, &f.w3})
            for (double w : *ws) {
                CHECK(std::fabs(w) >= 0.5);
                CHECK(std::fabs(w) <= 2.0);
            }
    }
    SUBCASE("output is bounded by the sum of head weights") {
        double bound = 0.0;
        for (double w : f.w3) bound += std::fabs(w);
        StructuralFn sf;
        sf.parents = {0, 1, 2};
        sf.impl = f;
        Rng rng(4);
        for (int rep = 0; rep < 200; ++rep) {
            double x[3] = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                           rng.uniform(-5.0, 5.0)};
            CHECK(std::fabs(sf.eval(x)) <= bound);
        }
    }
    SUBCASE("deterministic in the seed") {
        const MlpFn g = gen_mlp_fn(3, 21, 8);
        CHECK(f.w1 == g.w1);
        CHECK(f.w2 == g.w2);
        CHECK(f.w3 == g.w3);
    }
}

TEST_CASE("gen_noise parameter ranges") {
    for (uint64_t s = 0; s < 100; ++s) {
        const NoiseSpec g = gen_noise(NoiseFamily::gaussian, s);
        CHECK(g.a >= 0.75);
        CHECK(g.a <= 1.25);
        CHECK(g.b == 1.0);
        const NoiseSpec b = gen_noise(NoiseFamily::beta, s);
        CHECK(b.a >= 0.75);
        CHECK(b.a <= 1.25);
        CHECK(b.b >= 0.75);
        CHECK(b.b <= 1.25);
        CHECK_FALSE(b.centering);
    }
}

TEST_CASE("gen_order_task") {
    SUBCASE("linearity 1 gives linear functions everywhere") {
        OrderBenchConfig cfg;
        cfg.d = 8;
        cfg.n = 100;
        cfg.linearity = 1.0;
        const StructuralModel m = gen_order_task(cfg, 5);
        for (size_t i = 0; i < m.dim(); ++i) {
            if (m.graph.parents(i).empty())
                CHECK(std::holds_alternative<std::monostate>(m.functions[i].impl));
            else
                CHECK(std::holds_alternative<LinearFn>(m.functions[i].impl));
        }
    }
    SUBCASE("linearity 0 gives sampled functions everywhere") {
        OrderBenchConfig cfg;
        cfg.d = 8;
        cfg.n = 100;
        cfg.n_anchor = 32;
        cfg.linearity = 0.0;
        const StructuralModel m = gen_order_task(cfg, 5);
        for (size_t i = 0; i < m.dim(); ++i) {
            if (m.graph.parents(i).empty()) continue;
            REQUIRE(std::holds_alternative<GpFn>(m.functions[i].impl));
            CHECK(std::get<GpFn>(m.functions[i].impl).anchors.rows() == 32);
        }
    }
    SUBCASE("linearity 0.5 splits the non-root nodes about evenly") {
        OrderBenchConfig cfg;
        cfg.d = 20;
        cfg.n = 200;
        cfg.n_anchor = 32;
        cfg.linearity = 0.5;
        size_t linear = 0, total = 0;
        for (uint64_t s = 0; s < 200; ++s) {
            const StructuralModel m = gen_order_task(cfg, s);
            for (size_t i = 0; i < m.dim(); ++i) {
                if (m.graph.parents(i).empty()) continue;
                ++total;
                if (std::holds_alternative<LinearFn>(m.functions[i].impl))
                    ++linear;
            }
        }
        const double frac = static_cast<double>(linear) / total;
        CHECK(frac > 0.42);
        CHECK(frac < 0.58);
    }
    SUBCASE("noise family follows the config") {
        OrderBenchConfig cfg;
        cfg.d = 5;
        cfg.n = 50;
        cfg.noise = NoiseFamily::beta;
        const StructuralModel m = gen_order_task(cfg, 1);
        for (const auto& s : m.noises) CHECK(s.family == NoiseFamily::beta);
    }
    SUBCASE("deterministic in the seed") {
        OrderBenchConfig cfg;
        cfg.d = 6;
        cfg.n = 100;
        cfg.n_anchor = 16;
        cfg.linearity = 0.5;
        const auto a = model_to_json(gen_order_task(cfg, 77));
        const auto b = model_to_json(gen_order_task(cfg, 77));
        CHECK(a.dump() == b.dump());
    }
}

TEST_CASE("gen_auf_task") {
    AufBenchConfig cfg;
    cfg.d = 15;
    cfg.n = 1000;
    auto [m, t] = gen_auf_task(cfg, 3);
    const size_t n_edge = (cfg.d + 4) / 5;

    SUBCASE("roles follow the topological order") {
        const Order topo = topological_order(m.graph);
        size_t ctx = 0, out = 0;
        for (Role r : t.roles) {
            if (r == Role::context) ++ctx;
            if (r == Role::outcome) ++out;
        }
        CHECK(ctx == n_edge);
        CHECK(out == n_edge);
        for (size_t k = 0; k < n_edge; ++k) {
            CHECK(t.roles[topo.perm[k]] == Role::context);
            CHECK(t.roles[topo.perm[cfg.d - 1 - k]] == Role::outcome);
        }
    }
    SUBCASE("alterable nodes are intermediate ancestors of an outcome") {
        REQUIRE(!t.alterable.empty());
        const auto outcomes = t.outcome_nodes();
        for (size_t a : t.alterable) {
            CHECK(t.roles[a] == Role::intermediate);
            const auto de = descendants(m.graph, a);
            bool reaches = false;
            for (size_t y : outcomes)
                reaches = reaches ||
                          std::find(de.begin(), de.end(), y) != de.end();
            CHECK(reaches);
        }
    }
    SUBCASE("region is a nonempty box around the outcomes") {
        const size_t ny = t.outcome_nodes().size();
        REQUIRE(t.region_m.rows() == 2 * ny);
        REQUIRE(t.region_m.cols() == ny);
        for (size_t a = 0; a < ny; ++a) {
            for (size_t b = 0; b < ny; ++b) {
                CHECK(t.region_m(a, b) == (a == b ? 1.0 : 0.0));
                CHECK(t.region_m(ny + a, b) == (a == b ? -1.0 : 0.0));
            }
            // Upper minus lower bound is twice the outcome spread.
            CHECK(t.region_d[a] + t.region_d[ny + a] > 0.0);
        }
    }
    SUBCASE("decision domain is twice as wide as the target box") {
        for (const auto& iv : t.domain) CHECK(iv[1] > iv[0]);
        CHECK(t.domain.size() == t.alterable.size());
    }
    SUBCASE("linear config gives linear functions") {
        for (size_t i = 0; i < m.dim(); ++i)
            if (!m.graph.parents(i).empty())
                CHECK(std::holds_alternative<LinearFn>(m.functions[i].impl));
    }
    SUBCASE("nonlinear config gives mlp functions") {
        AufBenchConfig nl = cfg;
        nl.linear = false;
        nl.d = 12;
        auto [m2, t2] = gen_auf_task(nl, 3);
        for (size_t i = 0; i < m2.dim(); ++i)
            if (!m2.graph.parents(i).empty())
                CHECK(std::holds_alternative<MlpFn>(m2.functions[i].impl));
        CHECK_NOTHROW(t2.validate(m2.graph));
    }
    SUBCASE("deterministic in the seed") {
        auto [m2, t2] = gen_auf_task(cfg, 3);
        CHECK(model_to_json(m2).dump() == model_to_json(m).dump());
        CHECK(task_to_json(t2).dump() == task_to_json(t).dump());
    }
    SUBCASE("tasks vary across seeds") {
        auto [m2, t2] = gen_auf_task(cfg, 4);
        CHECK(model_to_json(m2).dump() != model_to_json(m).dump());
    }
}
