#include "auf/scm.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "auf/special.hpp"

namespace auf {

void Dag::add_edge(size_t from, size_t to) {
    const size_t d = num_nodes();
    if (from >= d || to >= d) throw std::out_of_range("add_edge: node index");
    if (from == to) throw std::invalid_argument("add_edge: self-loop");
    if (has_edge(from, to)) throw std::invalid_argument("add_edge: duplicate");
    parents_[to].push_back(from);
    children_[from].push_back(to);
    std::sort(parents_[to].begin(), parents_[to].end());
    std::sort(children_[from].begin(), children_[from].end());
    ++num_edges_;
}

bool Dag::has_edge(size_t from, size_t to) const {
    const auto& p = parents_.at(to);
    return std::binary_search(p.begin(), p.end(), from);
}

std::vector<std::pair<size_t, size_t>> Dag::edges() const {
    std::vector<std::pair<size_t, size_t>> out;
    out.reserve(num_edges_);
    for (size_t j = 0; j < num_nodes(); ++j)
        for (size_t i : parents_[j]) out.emplace_back(i, j);
    return out;
}

Order Order::from_perm(std::vector<size_t> perm) {
    Order o;
    o.inverse.assign(perm.size(), perm.size());
    for (size_t k = 0; k < perm.size(); ++k) {
        if (perm[k] >= perm.size() || o.inverse[perm[k]] != perm.size())
            throw std::invalid_argument("Order: not a permutation");
        o.inverse[perm[k]] = k;
    }
    o.perm = std::move(perm);
    return o;
}

std::vector<size_t> Order::predecessors(size_t node) const {
    std::vector<size_t> out;
    const size_t pos = inverse.at(node);
    out.reserve(pos);
    for (size_t k = 0; k < pos; ++k) out.push_back(perm[k]);
    return out;
}

Order topological_order(const Dag& g) {
    const size_t d = g.num_nodes();
    std::vector<size_t> indeg(d);
    for (size_t i = 0; i < d; ++i) indeg[i] = g.parents(i).size();
    std::priority_queue<size_t, std::vector<size_t>, std::greater<>> ready;
    for (size_t i = 0; i < d; ++i)
        if (indeg[i] == 0) ready.push(i);
    std::vector<size_t> perm;
    perm.reserve(d);
    while (!ready.empty()) {
        const size_t i = ready.top();
        ready.pop();
        perm.push_back(i);
        for (size_t c : g.children(i))
            if (--indeg[c] == 0) ready.push(c);
    }
    if (perm.size() != d)
        throw std::runtime_error("topological_order: cycle detected");
    return Order::from_perm(std::move(perm));
}

std::vector<size_t> descendants(const Dag& g, size_t i) {
    if (i >= g.num_nodes()) throw std::out_of_range("descendants: node index");
    std::vector<char> seen(g.num_nodes(), 0);
    std::vector<size_t> stack = {i};
    while (!stack.empty()) {
        const size_t u = stack.back();
        stack.pop_back();
        for (size_t c : g.children(u)) {
            if (!seen[c]) {
                seen[c] = 1;
                stack.push_back(c);
            }
        }
    }
    std::vector<size_t> out;
    for (size_t j = 0; j < g.num_nodes(); ++j)
        if (seen[j] && j != i) out.push_back(j);
    return out;
}

void NoiseSpec::validate() const {
    switch (family) {
        case NoiseFamily::gaussian:
            if (!(a > 0.0)) throw std::invalid_argument("gaussian: sigma > 0");
            break;
        case NoiseFamily::beta:
            if (!(a > 0.0) || !(b > 0.0))
                throw std::invalid_argument("beta: shapes > 0");
            break;
        case NoiseFamily::exponential:
            if (!(a > 0.0)) throw std::invalid_argument("exponential: rate > 0");
            break;
    }
}

double NoiseSpec::mean_raw() const {
    switch (family) {
        case NoiseFamily::gaussian:
            return 0.0;
        case NoiseFamily::beta:
            return a / (a + b);
        case NoiseFamily::exponential:
            return 1.0 / a;
    }
    return 0.0;
}

double NoiseSpec::sample(Rng& rng) const {
    double v = 0.0;
    switch (family) {
        case NoiseFamily::gaussian:
            v = a * rng.normal();
            break;
        case NoiseFamily::beta:
            v = rng.beta(a, b);
            break;
        case NoiseFamily::exponential:
            v = rng.exponential(a);
            break;
    }
    return centering ? v - mean_raw() : v;
}

double NoiseSpec::quantile(double u) const {
    double v = 0.0;
    switch (family) {
        case NoiseFamily::gaussian:
            v = a * normal_quantile(u);
            break;
        case NoiseFamily::beta:
            v = inv_reg_inc_beta(a, b, u);
            break;
        case NoiseFamily::exponential:
            v = -std::log1p(-u) / a;
            break;
    }
    return centering ? v - mean_raw() : v;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double eval_gp(const GpFn& f, const double* pa, size_t m) {
    double out = 0.0;
    for (size_t r = 0; r < f.anchors.rows(); ++r) {
        double sq = 0.0;
        for (size_t t = 0; t < m; ++t) {
            const double diff = pa[t] - f.anchors(r, t);
            sq += diff * diff;
        }
        out += std::exp(-0.5 * sq) * f.alpha[r];
    }
    return out;
}

double eval_mlp(const MlpFn& f, const double* pa) {
    std::vector<double> h1(f.hidden), h2(f.hidden);
    for (size_t i = 0; i < f.hidden; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < f.in; ++j) s += f.w1[i * f.in + j] * pa[j];
        h1[i] = sigmoid(s);
    }
    for (size_t i = 0; i < f.hidden; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < f.hidden; ++j) s += f.w2[i * f.hidden + j] * h1[j];
        h2[i] = sigmoid(s);
    }
    double out = 0.0;
    for (size_t j = 0; j < f.hidden; ++j) out += f.w3[j] * h2[j];
    return out;
}

}  // namespace

double StructuralFn::eval(const double* pa) const {
    if (std::holds_alternative<std::monostate>(impl)) return 0.0;
    if (const auto* lin = std::get_if<LinearFn>(&impl)) {
        double s = 0.0;
        for (size_t j = 0; j < parents.size(); ++j) s += lin->weights[j] * pa[j];
        return s;
    }
    if (const auto* gp = std::get_if<GpFn>(&impl))
        return eval_gp(*gp, pa, parents.size());
    return eval_mlp(std::get<MlpFn>(impl), pa);
}

void StructuralModel::validate() const {
    const size_t d = dim();
    if (functions.size() != d || noises.size() != d)
        throw std::invalid_argument("model: per-node arrays must have size d");
    for (size_t i = 0; i < d; ++i) {
        if (functions[i].parents != graph.parents(i))
            throw std::invalid_argument("model: function parents mismatch");
        if (std::holds_alternative<std::monostate>(functions[i].impl) &&
            !functions[i].parents.empty())
            throw std::invalid_argument("model: non-root node missing function");
        if (const auto* lin = std::get_if<LinearFn>(&functions[i].impl))
            if (lin->weights.size() != functions[i].parents.size())
                throw std::invalid_argument("model: weight arity");
        noises[i].validate();
    }
    topological_order(graph);
}

std::vector<double> DataMatrix::column(size_t j) const {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = at(i, j);
    return out;
}

namespace {

// Shared simulator: per row, walk the topological order; nodes listed in
// `overrides` are forced to the given value and their noise draw discarded
// (every node consumes one draw so streams align across variants).
DataMatrix simulate(const StructuralModel& m, size_t n, uint64_t seed,
                    const std::vector<std::optional<double>>& overrides) {
    const size_t d = m.dim();
    const Order topo = topological_order(m.graph);
    DataMatrix out(n, d);
    Rng rng = stream(seed, "simulate");
    std::vector<double> pa_buf;
    for (size_t row = 0; row < n; ++row) {
        for (size_t k = 0; k < d; ++k) {
            const size_t i = topo.perm[k];
            const double eps = m.noises[i].sample(rng);
            if (overrides[i].has_value()) {
                out.at(row, i) = *overrides[i];
                continue;
            }
            const auto& fn = m.functions[i];
            pa_buf.resize(fn.parents.size());
            for (size_t t = 0; t < fn.parents.size(); ++t)
                pa_buf[t] = out.at(row, fn.parents[t]);
            out.at(row, i) = fn.eval(pa_buf.data()) + eps;
        }
    }
    return out;
}

}  // namespace

DataMatrix sample_observational(const StructuralModel& m, size_t n,
                                uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_observational: n >= 1");
    return simulate(m, n, seed, std::vector<std::optional<double>>(m.dim()));
}

std::vector<size_t> AufTask::context_nodes() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < roles.size(); ++i)
        if (roles[i] == Role::context) out.push_back(i);
    return out;
}

std::vector<size_t> AufTask::outcome_nodes() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < roles.size(); ++i)
        if (roles[i] == Role::outcome) out.push_back(i);
    return out;
}

void AufTask::validate(const Dag& g) const {
    if (roles.size() != g.num_nodes())
        throw std::invalid_argument("task: role count");
    for (size_t i = 0; i < roles.size(); ++i) {
        if (roles[i] != Role::context) continue;
        for (size_t p : g.parents(i))
            if (roles[p] != Role::context)
                throw std::invalid_argument(
                    "task: context node with non-context parent");
    }
    std::vector<char> seen(roles.size(), 0);
    for (size_t a : alterable) {
        if (a >= roles.size() || roles[a] != Role::intermediate)
            throw std::invalid_argument("task: alterable must be intermediate");
        if (seen[a]) throw std::invalid_argument("task: duplicate alterable");
        seen[a] = 1;
    }
    if (domain.size() != alterable.size())
        throw std::invalid_argument("task: domain arity");
    for (const auto& iv : domain)
        if (!(iv[0] <= iv[1])) throw std::invalid_argument("task: empty interval");
    const size_t ny = outcome_nodes().size();
    if (region_m.rows() != region_d.size() ||
        (region_m.rows() > 0 && region_m.cols() != ny))
        throw std::invalid_argument("task: region shape");
}

DataMatrix sample_interventional(const StructuralModel& m, const AufTask& task,
                                 const std::vector<double>& x,
                                 const std::vector<double>& z_a, size_t n,
                                 uint64_t seed) {
    task.validate(m.graph);
    const auto ctx = task.context_nodes();
    if (x.size() != ctx.size())
        throw std::invalid_argument("sample_interventional: context arity");
    if (z_a.size() != task.alterable.size())
        throw std::invalid_argument("sample_interventional: decision arity");
    std::vector<std::optional<double>> overrides(m.dim());
    for (size_t t = 0; t < ctx.size(); ++t) overrides[ctx[t]] = x[t];
    for (size_t t = 0; t < task.alterable.size(); ++t)
        overrides[task.alterable[t]] = z_a[t];
    return simulate(m, n, seed, overrides);
}

bool is_linear_gaussian(const StructuralModel& m) {
    for (size_t i = 0; i < m.dim(); ++i) {
        if (m.noises[i].family != NoiseFamily::gaussian) return false;
        const auto& impl = m.functions[i].impl;
        if (!std::holds_alternative<std::monostate>(impl) &&
            !std::holds_alternative<LinearFn>(impl))
            return false;
    }
    return true;
}

namespace {

// Weight matrix B with B(i, j) = coefficient of parent j in node i.
Mat weight_matrix(const StructuralModel& m) {
    const size_t d = m.dim();
    Mat b(d, d);
    for (size_t i = 0; i < d; ++i) {
        if (const auto* lin = std::get_if<LinearFn>(&m.functions[i].impl)) {
            const auto& pa = m.functions[i].parents;
            for (size_t t = 0; t < pa.size(); ++t) b(i, pa[t]) = lin->weights[t];
        }
    }
    return b;
}

}  // namespace

Mat linear_gaussian_covariance(const StructuralModel& m) {
    if (!is_linear_gaussian(m))
        throw std::invalid_argument("covariance: model not linear-Gaussian");
    const size_t d = m.dim();
    Mat imb = Mat::identity(d);
    const Mat b = weight_matrix(m);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) imb(i, j) -= b(i, j);
    Mat inv = lu_solve(imb, Mat::identity(d));
    Mat invd = inv;  // (I-B)^{-1} D
    for (size_t i = 0; i < d; ++i) {
        const double var = m.noises[i].a * m.noises[i].a;
        for (size_t r = 0; r < d; ++r) invd(r, i) *= var;
    }
    return matmul(invd, transpose(inv));
}

GaussianMoments linear_gaussian_interventional(
    const StructuralModel& m, const std::vector<size_t>& fixed,
    const std::vector<double>& values) {
    if (!is_linear_gaussian(m))
        throw std::invalid_argument("interventional: model not linear-Gaussian");
    if (fixed.size() != values.size())
        throw std::invalid_argument("interventional: arity");
    const size_t d = m.dim();
    Mat b = weight_matrix(m);
    std::vector<double> noise_var(d);
    std::vector<double> base(d, 0.0);
    for (size_t i = 0; i < d; ++i)
        noise_var[i] = m.noises[i].a * m.noises[i].a;
    for (size_t t = 0; t < fixed.size(); ++t) {
        const size_t i = fixed[t];
        for (size_t j = 0; j < d; ++j) b(i, j) = 0.0;
        noise_var[i] = 0.0;
        base[i] = values[t];
    }
    Mat imb = Mat::identity(d);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) imb(i, j) -= b(i, j);
    Mat inv = lu_solve(imb, Mat::identity(d));
    GaussianMoments out;
    out.mean.assign(d, 0.0);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) out.mean[i] += inv(i, j) * base[j];
    Mat invd = inv;
    for (size_t j = 0; j < d; ++j)
        for (size_t r = 0; r < d; ++r) invd(r, j) *= noise_var[j];
    out.cov = matmul(invd, transpose(inv));
    return out;
}

namespace {

using nlohmann::json;

json noise_to_json(const NoiseSpec& s) {
    const char* fam = s.family == NoiseFamily::gaussian     ? "gaussian"
                      : s.family == NoiseFamily::beta       ? "beta"
                                                            : "exponential";
    return json{{"family", fam}, {"a", s.a}, {"b", s.b},
                {"centering", s.centering}};
}

NoiseSpec noise_from_json(const json& j) {
    NoiseSpec s;
    const std::string fam = j.at("family");
    if (fam == "gaussian")
        s.family = NoiseFamily::gaussian;
    else if (fam == "beta")
        s.family = NoiseFamily::beta;
    else if (fam == "exponential")
        s.family = NoiseFamily::exponential;
    else
        throw std::invalid_argument("noise: unknown family " + fam);
    s.a = j.at("a");
    s.b = j.at("b");
    s.centering = j.at("centering");
    return s;
}

json fn_to_json(const StructuralFn& f) {
    json out{{"parents", f.parents}};
    if (std::holds_alternative<std::monostate>(f.impl)) {
        out["kind"] = "root";
    } else if (const auto* lin = std::get_if<LinearFn>(&f.impl)) {
        out["kind"] = "linear";
        out["weights"] = lin->weights;
    } else if (const auto* gp = std::get_if<GpFn>(&f.impl)) {
        out["kind"] = "gp";
        out["jitter"] = gp->jitter;
        out["alpha"] = gp->alpha;
        out["anchors"] = mat_to_json(gp->anchors);
    } else {
        const auto& mlp = std::get<MlpFn>(f.impl);
        out["kind"] = "mlp";
        out["in"] = mlp.in;
        out["hidden"] = mlp.hidden;
        out["w1"] = mlp.w1;
        out["w2"] = mlp.w2;
        out["w3"] = mlp.w3;
    }
    return out;
}

StructuralFn fn_from_json(const json& j) {
    StructuralFn f;
    f.parents = j.at("parents").get<std::vector<size_t>>();
    const std::string kind = j.at("kind");
    if (kind == "root") {
        f.impl = std::monostate{};
    } else if (kind == "linear") {
        f.impl = LinearFn{j.at("weights").get<std::vector<double>>()};
    } else if (kind == "gp") {
        GpFn gp;
        gp.jitter = j.at("jitter");
        gp.alpha = j.at("alpha").get<std::vector<double>>();
        gp.anchors = mat_from_json(j.at("anchors"));
        f.impl = std::move(gp);
    } else if (kind == "mlp") {
        MlpFn mlp;
        mlp.in = j.at("in");
        mlp.hidden = j.at("hidden");
        mlp.w1 = j.at("w1").get<std::vector<double>>();
        mlp.w2 = j.at("w2").get<std::vector<double>>();
        mlp.w3 = j.at("w3").get<std::vector<double>>();
        f.impl = std::move(mlp);
    } else {
        throw std::invalid_argument("function: unknown kind " + kind);
    }
    return f;
}

}  // namespace

nlohmann::json mat_to_json(const Mat& m) {
    std::vector<double> flat(m.data(), m.data() + m.rows() * m.cols());
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()},
                          {"values", flat}};
}

Mat mat_from_json(const nlohmann::json& j) {
    Mat m(j.at("rows").get<size_t>(), j.at("cols").get<size_t>());
    const auto flat = j.at("values").get<std::vector<double>>();
    if (flat.size() != m.rows() * m.cols())
        throw std::invalid_argument("mat: value count mismatch");
    std::copy(flat.begin(), flat.end(), m.data());
    return m;
}

nlohmann::json graph_to_json(const Dag& g) {
    std::vector<std::array<size_t, 2>> edges;
    for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
    return nlohmann::json{{"d", g.num_nodes()}, {"edges", edges}};
}

Dag graph_from_json(const nlohmann::json& j) {
    Dag g(j.at("d").get<size_t>());
    for (const auto& e : j.at("edges"))
        g.add_edge(e.at(0).get<size_t>(), e.at(1).get<size_t>());
    return g;
}

nlohmann::json model_to_json(const StructuralModel& m) {
    nlohmann::json fns = nlohmann::json::array();
    nlohmann::json noises = nlohmann::json::array();
    for (size_t i = 0; i < m.dim(); ++i) {
        fns.push_back(fn_to_json(m.functions[i]));
        noises.push_back(noise_to_json(m.noises[i]));
    }
    return nlohmann::json{{"graph", graph_to_json(m.graph)},
                          {"functions", fns},
                          {"noises", noises}};
}

StructuralModel model_from_json(const nlohmann::json& j) {
    StructuralModel m;
    m.graph = graph_from_json(j.at("graph"));
    for (const auto& f : j.at("functions")) m.functions.push_back(fn_from_json(f));
    for (const auto& s : j.at("noises")) m.noises.push_back(noise_from_json(s));
    m.validate();
    return m;
}

nlohmann::json task_to_json(const AufTask& t) {
    std::vector<std::string> roles;
    for (Role r : t.roles)
        roles.push_back(r == Role::context       ? "context"
                        : r == Role::intermediate ? "intermediate"
                                                  : "outcome");
    std::vector<double> m_flat(t.region_m.data(),
                               t.region_m.data() +
                                   t.region_m.rows() * t.region_m.cols());
    return nlohmann::json{{"roles", roles},
                          {"alterable", t.alterable},
                          {"domain", t.domain},
                          {"region_rows", t.region_m.rows()},
                          {"region_cols", t.region_m.cols()},
                          {"region_m", m_flat},
                          {"region_d", t.region_d}};
}

AufTask task_from_json(const nlohmann::json& j) {
    AufTask t;
    for (const auto& r : j.at("roles")) {
        const std::string s = r;
        t.roles.push_back(s == "context"       ? Role::context
                          : s == "intermediate" ? Role::intermediate
                                                : Role::outcome);
    }
    t.alterable = j.at("alterable").get<std::vector<size_t>>();
    t.domain = j.at("domain").get<std::vector<std::array<double, 2>>>();
    const size_t r = j.at("region_rows");
    const size_t c = j.at("region_cols");
    const auto flat = j.at("region_m").get<std::vector<double>>();
    t.region_m = Mat(r, c);
    std::copy(flat.begin(), flat.end(), t.region_m.data());
    t.region_d = j.at("region_d").get<std::vector<double>>();
    return t;
}

nlohmann::json order_to_json(const Order& o) {
    return nlohmann::json{{"perm", o.perm}};
}

Order order_from_json(const nlohmann::json& j) {
    return Order::from_perm(j.at("perm").get<std::vector<size_t>>());
}

}  // namespace auf
