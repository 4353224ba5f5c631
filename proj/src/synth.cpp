#include "auf/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace auf {

void OrderBenchConfig::validate() const {
    if (d == 0) throw std::invalid_argument("config: d > 0");
    if (!(edge_density > 0.0) || edge_density > 1.0)
        throw std::invalid_argument("config: edge_density in (0,1]");
    if (!(linearity >= 0.0) || linearity > 1.0)
        throw std::invalid_argument("config: linearity in [0,1]");
    if (n < 2) throw std::invalid_argument("config: n >= 2");
    if (epochs == 0 || tasks_per_epoch == 0 || n_anchor == 0)
        throw std::invalid_argument("config: counts positive");
}

void AufBenchConfig::validate() const {
    if (d == 0 || tasks == 0 || rounds == 0 || eval_trials == 0 || n == 0 ||
        mlp_hidden == 0)
        throw std::invalid_argument("config: counts positive");
    if (!(edge_density > 0.0) || edge_density > 1.0)
        throw std::invalid_argument("config: edge_density in (0,1]");
}

Dag gen_er_dag(size_t d, double p, uint64_t seed) {
    if (d == 0) throw std::invalid_argument("gen_er_dag: d > 0");
    if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("gen_er_dag: p in (0,1]");
    Rng rng = stream(seed, "er_dag");
    const auto perm = rng.permutation(d);
    Dag g(d);
    for (size_t a = 0; a < d; ++a)
        for (size_t b = a + 1; b < d; ++b)
            if (rng.uniform() < p) g.add_edge(perm[a], perm[b]);
    return g;
}

LinearFn gen_linear_fn(size_t n_parents, uint64_t seed,
                       const CoeffRange& range) {
    if (n_parents == 0) throw std::invalid_argument("gen_linear_fn: parents");
    if (!(range.lo <= range.hi))
        throw std::invalid_argument("gen_linear_fn: empty range");
    Rng rng = stream(seed, "linear_fn");
    LinearFn f;
    f.weights.resize(n_parents);
    for (auto& w : f.weights) {
        w = rng.uniform(range.lo, range.hi);
        if (range.signed_band && rng.uniform() < 0.5) w = -w;
    }
    return f;
}

GpFn gen_gp_fn(const Mat& anchor_rows, uint64_t seed) {
    const size_t n = anchor_rows.rows();
    const size_t m = anchor_rows.cols();
    if (n == 0 || m == 0) throw std::invalid_argument("gen_gp_fn: anchors");
    Mat k(n, n);
    for (size_t a = 0; a < n; ++a) {
        k(a, a) = 1.0;
        for (size_t b = a + 1; b < n; ++b) {
            double sq = 0.0;
            for (size_t t = 0; t < m; ++t) {
                const double diff = anchor_rows(a, t) - anchor_rows(b, t);
                sq += diff * diff;
            }
            k(a, b) = k(b, a) = std::exp(-0.5 * sq);
        }
    }
    Mat l;
    double jitter = 1e-8;
    for (;; jitter *= 100.0) {
        Mat kj = k;
        for (size_t a = 0; a < n; ++a) kj(a, a) += jitter;
        if (cholesky(kj, l)) break;
        if (jitter > 1e-2)
            throw std::runtime_error("gen_gp_fn: kernel matrix not factorizable");
    }
    Rng rng = stream(seed, "gp_fn");
    Mat z(n, 1);
    for (size_t a = 0; a < n; ++a) z(a, 0) = rng.normal();
    // Path values g = L z; weights alpha solve (K + jitter I) alpha = g.
    Mat g(n, 1);
    for (size_t a = 0; a < n; ++a) {
        double s = 0.0;
        for (size_t b = 0; b <= a; ++b) s += l(a, b) * z(b, 0);
        g(a, 0) = s;
    }
    Mat alpha = chol_solve(l, g);
    GpFn out;
    out.anchors = anchor_rows;
    out.jitter = jitter;
    out.alpha.resize(n);
    for (size_t a = 0; a < n; ++a) out.alpha[a] = alpha(a, 0);
    return out;
}

MlpFn gen_mlp_fn(size_t n_parents, uint64_t seed, size_t hidden) {
    if (n_parents == 0) throw std::invalid_argument("gen_mlp_fn: parents");
    Rng rng = stream(seed, "mlp_fn");
    const CoeffRange band = CoeffRange::banded(0.5, 2.0);
    auto draw = [&] {
        double w = rng.uniform(band.lo, band.hi);
        return rng.uniform() < 0.5 ? -w : w;
    };
    MlpFn f;
    f.in = n_parents;
    f.hidden = hidden;
    f.w1.resize(hidden * n_parents);
    f.w2.resize(hidden * hidden);
    f.w3.resize(hidden);
    for (auto& w : f.w1) w = draw();
    for (auto& w : f.w2) w = draw();
    for (auto& w : f.w3) w = draw();
    return f;
}

NoiseSpec gen_noise(NoiseFamily family, uint64_t seed) {
    Rng rng = stream(seed, "noise");
    NoiseSpec s;
    s.family = family;
    s.a = rng.uniform(0.75, 1.25);
    s.b = family == NoiseFamily::beta ? rng.uniform(0.75, 1.25) : 1.0;
    return s;
}

StructuralModel gen_order_task(const OrderBenchConfig& cfg, uint64_t seed) {
    cfg.validate();
    StructuralModel m;
    m.graph = gen_er_dag(cfg.d, cfg.edge_density, mix_seed(seed, 1));
    m.functions.resize(cfg.d);
    m.noises.resize(cfg.d);
    for (size_t i = 0; i < cfg.d; ++i) {
        m.functions[i].parents = m.graph.parents(i);
        m.noises[i] = gen_noise(cfg.noise, mix_seed(seed, 2, i));
    }
    // Materialize nonlinear functions against simulated parent rows, walking
    // the graph in topological order so parents are realized first.
    const Order topo = topological_order(m.graph);
    Rng kind_rng = stream(seed, "fn_kind");
    Rng noise_rng = stream(seed, "gen_sim");
    DataMatrix sim(cfg.n, cfg.d);
    std::vector<double> pa_buf;
    for (size_t kpos = 0; kpos < cfg.d; ++kpos) {
        const size_t i = topo.perm[kpos];
        const auto& parents = m.graph.parents(i);
        if (!parents.empty()) {
            if (kind_rng.uniform() < cfg.linearity) {
                m.functions[i].impl = gen_linear_fn(
                    parents.size(), mix_seed(seed, 3, i),
                    CoeffRange::banded(0.25, 1.0));
            } else {
                const size_t n_anchor = std::min(cfg.n_anchor, cfg.n);
                const size_t stride = cfg.n / n_anchor;
                Mat anchors(n_anchor, parents.size());
                for (size_t a = 0; a < n_anchor; ++a)
                    for (size_t t = 0; t < parents.size(); ++t)
                        anchors(a, t) = sim.at(a * stride, parents[t]);
                m.functions[i].impl = gen_gp_fn(anchors, mix_seed(seed, 4, i));
            }
        }
        pa_buf.resize(parents.size());
        for (size_t row = 0; row < cfg.n; ++row) {
            for (size_t t = 0; t < parents.size(); ++t)
                pa_buf[t] = sim.at(row, parents[t]);
            sim.at(row, i) =
                m.functions[i].eval(pa_buf.data()) + m.noises[i].sample(noise_rng);
        }
    }
    m.validate();
    return m;
}

namespace {

std::vector<size_t> ancestors(const Dag& g, size_t i) {
    std::vector<char> seen(g.num_nodes(), 0);
    std::vector<size_t> stack = {i};
    while (!stack.empty()) {
        const size_t u = stack.back();
        stack.pop_back();
        for (size_t p : g.parents(u)) {
            if (!seen[p]) {
                seen[p] = 1;
                stack.push_back(p);
            }
        }
    }
    std::vector<size_t> out;
    for (size_t j = 0; j < g.num_nodes(); ++j)
        if (seen[j] && j != i) out.push_back(j);
    return out;
}

}  // namespace

std::pair<StructuralModel, AufTask> gen_auf_task(const AufBenchConfig& cfg,
                                                 uint64_t seed) {
    cfg.validate();
    for (uint64_t attempt = 0;; ++attempt) {
        if (attempt > 64)
            throw std::runtime_error("gen_auf_task: no usable instance found");
        const uint64_t s = mix_seed(seed, 0x5eed, attempt);
        StructuralModel m;
        m.graph = gen_er_dag(cfg.d, cfg.edge_density, mix_seed(s, 1));
        m.functions.resize(cfg.d);
        m.noises.resize(cfg.d);
        for (size_t i = 0; i < cfg.d; ++i) {
            const auto& parents = m.graph.parents(i);
            m.functions[i].parents = parents;
            m.noises[i] = gen_noise(cfg.noise, mix_seed(s, 2, i));
            if (parents.empty()) continue;
            if (cfg.linear)
                m.functions[i].impl = gen_linear_fn(parents.size(),
                                                    mix_seed(s, 3, i),
                                                    CoeffRange::plain(-1.0, 1.0));
            else
                m.functions[i].impl =
                    gen_mlp_fn(parents.size(), mix_seed(s, 3, i), cfg.mlp_hidden);
        }
        m.validate();

        const Order topo = topological_order(m.graph);
        const size_t n_edge = (cfg.d + 4) / 5;  // ceil(d/5)
        AufTask task;
        task.roles.assign(cfg.d, Role::intermediate);
        for (size_t k = 0; k < n_edge; ++k) {
            task.roles[topo.perm[k]] = Role::context;
            task.roles[topo.perm[cfg.d - 1 - k]] = Role::outcome;
        }

        // Alterable candidates: intermediate ancestors of any outcome.
        const auto outcomes = task.outcome_nodes();
        std::vector<char> candidate(cfg.d, 0);
        for (size_t y : outcomes)
            for (size_t a : ancestors(m.graph, y))
                if (task.roles[a] == Role::intermediate) candidate[a] = 1;
        bool any_candidate = false;
        for (char c : candidate) any_candidate = any_candidate || c;
        if (!any_candidate) continue;

        Rng coin = stream(s, "alterable");
        std::vector<char> keep(cfg.d, 0);
        bool nonempty = false;
        for (int retry = 0; retry < 32 && !nonempty; ++retry) {
            std::fill(keep.begin(), keep.end(), 0);
            for (size_t y : outcomes) {
                for (size_t a : ancestors(m.graph, y)) {
                    if (task.roles[a] != Role::intermediate) continue;
                    if (coin.uniform() < 0.5) keep[a] = 1;
                }
            }
            for (char c : keep) nonempty = nonempty || c;
        }
        if (!nonempty) continue;
        for (size_t i = 0; i < cfg.d; ++i)
            if (keep[i]) task.alterable.push_back(i);

        const DataMatrix data =
            sample_observational(m, cfg.n, mix_seed(s, 0xda7a));
        std::vector<double> mu(cfg.d, 0.0), sd(cfg.d, 0.0);
        for (size_t j = 0; j < cfg.d; ++j) {
            double sum = 0.0, sum2 = 0.0;
            for (size_t i = 0; i < cfg.n; ++i) {
                const double v = data.at(i, j);
                sum += v;
                sum2 += v * v;
            }
            mu[j] = sum / cfg.n;
            sd[j] = std::sqrt((sum2 - cfg.n * mu[j] * mu[j]) /
                              (cfg.n > 1 ? cfg.n - 1 : 1));
        }
        for (size_t a : task.alterable)
            task.domain.push_back({mu[a] - 2.0 * sd[a], mu[a] + 2.0 * sd[a]});
        const size_t ny = outcomes.size();
        task.region_m = Mat(2 * ny, ny);
        task.region_d.resize(2 * ny);
        for (size_t t = 0; t < ny; ++t) {
            const size_t y = outcomes[t];
            task.region_m(t, t) = 1.0;
            task.region_d[t] = mu[y] + sd[y];
            task.region_m(ny + t, t) = -1.0;
            task.region_d[ny + t] = -(mu[y] - sd[y]);
        }
        task.validate(m.graph);
        return {std::move(m), std::move(task)};
    }
}

}  // namespace auf
