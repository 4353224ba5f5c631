#include "auf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "auf/metrics.hpp"
#include "auf/parallel.hpp"
#include "auf/rng.hpp"

namespace auf {

namespace {

using nlohmann::json;

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; a single run reports zero spread.
double std_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Mat normal_mat(size_t rows, size_t cols, Rng& rng) {
    Mat m(rows, cols);
    double* p = m.data();
    for (size_t i = 0; i < rows * cols; ++i) p[i] = rng.normal();
    return m;
}

const char* noise_name(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::beta: return "beta";
        case NoiseFamily::exponential: return "exponential";
    }
    return "gaussian";
}

const char* noise_tag(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gauss";
        case NoiseFamily::beta: return "beta";
        case NoiseFamily::exponential: return "exp";
    }
    return "gauss";
}

NoiseFamily noise_from(const std::string& s) {
    if (s == "gaussian" || s == "gauss") return NoiseFamily::gaussian;
    if (s == "beta") return NoiseFamily::beta;
    if (s == "exponential" || s == "exp") return NoiseFamily::exponential;
    throw std::invalid_argument("unknown noise family '" + s + "'");
}

json prune_to_json(const PruneConfig& p) {
    return {{"cutoff", p.cutoff},
            {"spline_basis", p.spline_basis},
            {"spline_knots", p.spline_knots}};
}

PruneConfig prune_from_json(const json& j) {
    PruneConfig p;
    p.cutoff = j.value("cutoff", p.cutoff);
    p.spline_basis = j.value("spline_basis", p.spline_basis);
    p.spline_knots = j.value("spline_knots", p.spline_knots);
    return p;
}

json flow_to_json(const TrainConfig& c) {
    return {{"blocks", c.blocks},       {"width", c.width},
            {"lr", c.lr},               {"batch", c.batch},
            {"train_frac", c.train_frac}, {"patience", c.patience},
            {"max_epochs", c.max_epochs}};
}

TrainConfig flow_from_json(const json& j) {
    TrainConfig c;
    c.blocks = j.value("blocks", c.blocks);
    c.width = j.value("width", c.width);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.train_frac = j.value("train_frac", c.train_frac);
    c.patience = j.value("patience", c.patience);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    return c;
}

json opt_to_json(const OptConfig& c) {
    return {{"n_noise", c.n_noise},
            {"lr", c.lr},
            {"iterations", c.iterations},
            {"restarts", c.restarts}};
}

OptConfig opt_from_json(const json& j) {
    OptConfig c;
    c.n_noise = j.value("n_noise", c.n_noise);
    c.lr = j.value("lr", c.lr);
    c.iterations = j.value("iterations", c.iterations);
    c.restarts = j.value("restarts", c.restarts);
    return c;
}

// Scalar-or-array config fields: {"d": 10} and {"d": [5, 10]} both work.
template <typename T>
std::vector<T> list_of(const json& j, const char* key, std::vector<T> dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    std::vector<T> out;
    if (v.is_array())
        for (const json& e : v) out.push_back(e.get<T>());
    else
        out.push_back(v.get<T>());
    return out;
}

std::vector<NoiseFamily> noise_list(const json& j, const char* key,
                                    std::vector<NoiseFamily> dflt) {
    if (!j.contains(key)) return dflt;
    std::vector<std::string> raw =
        list_of<std::string>(j, key, {});
    std::vector<NoiseFamily> out;
    for (const std::string& s : raw) out.push_back(noise_from(s));
    return out;
}

uint64_t hash_of(const json& canonical) {
    return hash_tag(canonical.dump());
}

ResultRow agg_row(std::string setting, std::string method, std::string metric,
                  const std::vector<double>& values) {
    const double m = mean_of(values);
    return {std::move(setting), std::move(method), std::move(metric), m,
            std_of(values, m), values.size()};
}

}  // namespace

json RunManifest::to_json() const {
    return {{"tool", tool},
            {"config_hash", config_hash},
            {"master_seed", master_seed},
            {"version", version},
            {"results_format", results_format},
            {"task_seeds", task_seeds},
            {"extra", extra.is_null() ? json::object() : extra}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.tool = j.at("tool").get<std::string>();
    m.config_hash = j.at("config_hash").get<uint64_t>();
    m.master_seed = j.at("master_seed").get<uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.results_format = j.at("results_format").get<std::string>();
    m.task_seeds = j.at("task_seeds").get<std::vector<uint64_t>>();
    m.extra = j.value("extra", json::object());
    return m;
}

void ResultTable::validate() const {
    if (rows.empty())
        throw std::invalid_argument("result table has no rows");
    for (const ResultRow& r : rows) {
        if (!(r.std_dev >= 0.0))
            throw std::invalid_argument("result row '" + r.setting + "/" +
                                        r.method + "/" + r.metric +
                                        "' has negative std");
        if (r.n_runs == 0)
            throw std::invalid_argument("result row '" + r.setting + "/" +
                                        r.method + "/" + r.metric +
                                        "' has zero runs");
    }
}

bool ResultTable::operator==(const ResultTable& other) const {
    if (rows.size() != other.rows.size()) return false;
    for (size_t i = 0; i < rows.size(); ++i) {
        const ResultRow& a = rows[i];
        const ResultRow& b = other.rows[i];
        if (a.setting != b.setting || a.method != b.method ||
            a.metric != b.metric || a.mean != b.mean ||
            a.std_dev != b.std_dev || a.n_runs != b.n_runs)
            return false;
    }
    return true;
}

json load_config_json(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error(path + ": cannot open config file");
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        size_t line = 1;
        const size_t stop = std::min(e.byte, text.size());
        for (size_t i = 0; i < stop; ++i)
            if (text[i] == '\n') ++line;
        throw std::runtime_error(path + ":" + std::to_string(line) + ": " +
                                 e.what());
    }
}

void OrderBenchSweep::validate() const {
    if (dims.empty() || densities.empty() || linearities.empty() ||
        noises.empty())
        throw std::invalid_argument("order bench sweep has an empty axis");
    for (size_t d : dims)
        if (d < 2) throw std::invalid_argument("order bench needs d >= 2");
    for (double p : densities)
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("edge density outside [0, 1]");
    for (double r : linearities)
        if (!(r >= 0.0 && r <= 1.0))
            throw std::invalid_argument("linearity outside [0, 1]");
    if (n < 10 || epochs == 0 || tasks_per_epoch == 0)
        throw std::invalid_argument("order bench needs n >= 10 and at least "
                                    "one epoch and task");
}

json OrderBenchSweep::to_json() const {
    json noise_names = json::array();
    for (NoiseFamily f : noises) noise_names.push_back(noise_name(f));
    return {{"d", dims},
            {"edge_density", densities},
            {"linearity", linearities},
            {"noise", noise_names},
            {"n", n},
            {"epochs", epochs},
            {"tasks_per_epoch", tasks_per_epoch},
            {"n_anchor", n_anchor},
            {"knn_k", knn_k},
            {"prune", prune_to_json(prune)}};
}

OrderBenchSweep OrderBenchSweep::from_json(const json& j) {
    OrderBenchSweep cfg;
    cfg.dims = list_of<size_t>(j, "d", cfg.dims);
    cfg.densities = list_of<double>(j, "edge_density", cfg.densities);
    cfg.linearities = list_of<double>(j, "linearity", cfg.linearities);
    cfg.noises = noise_list(j, "noise", cfg.noises);
    cfg.n = j.value("n", cfg.n);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.tasks_per_epoch = j.value("tasks_per_epoch", cfg.tasks_per_epoch);
    cfg.n_anchor = j.value("n_anchor", cfg.n_anchor);
    cfg.knn_k = j.value("knn_k", cfg.knn_k);
    if (j.contains("prune")) cfg.prune = prune_from_json(j.at("prune"));
    cfg.validate();
    return cfg;
}

OrderBenchResult run_order_bench(const OrderBenchSweep& cfg, uint64_t seed,
                                 size_t jobs) {
    cfg.validate();

    struct Cell {
        OrderBenchConfig gc;
        std::string label;
    };
    std::vector<Cell> cells;
    for (size_t d : cfg.dims)
        for (double p : cfg.densities)
            for (double r : cfg.linearities)
                for (NoiseFamily f : cfg.noises) {
                    OrderBenchConfig gc;
                    gc.d = d;
                    gc.edge_density = p;
                    gc.linearity = r;
                    gc.noise = f;
                    gc.n = cfg.n;
                    gc.epochs = cfg.epochs;
                    gc.tasks_per_epoch = cfg.tasks_per_epoch;
                    gc.n_anchor = cfg.n_anchor;
                    char label[64];
                    std::snprintf(label, sizeof label, "d%zu-p%.2f-r%.2f-%s",
                                  d, p, r, noise_tag(f));
                    cells.push_back({gc, label});
                }

    const size_t per_cell = cfg.epochs * cfg.tasks_per_epoch;
    const size_t total = cells.size() * per_cell;

    struct InstOut {
        double div = 0, shd_v = 0, sid_v = 0, rdiv = 0;
    };
    std::vector<InstOut> inst(total);
    std::vector<uint64_t> seeds(total);
    for (size_t idx = 0; idx < total; ++idx)
        seeds[idx] = mix_seed(seed, hash_tag("order-task"), idx / per_cell,
                              idx % per_cell);

    parallel_for(total, jobs, [&](size_t idx) {
        const Cell& cell = cells[idx / per_cell];
        const uint64_t s = seeds[idx];
        StructuralModel model = gen_order_task(cell.gc, s);
        DataMatrix data = sample_observational(
            model, cell.gc.n, mix_seed(s, hash_tag("obs")));
        EntropySource src = EntropySource::empirical(
            data, cfg.knn_k, mix_seed(s, hash_tag("jitter")));
        Order order = learn_order(src, 1);
        PrunedGraph pg = prune_to_dag(order, data, cfg.prune);
        InstOut& o = inst[idx];
        o.div = static_cast<double>(div_metric(order, model.graph));
        o.shd_v = static_cast<double>(shd(pg.graph, model.graph));
        o.sid_v = static_cast<double>(sid(pg.graph, model.graph));
        Order rnd = Order::from_perm(
            stream(s, "random-order").permutation(model.dim()));
        o.rdiv = static_cast<double>(div_metric(rnd, model.graph));
    });

    OrderBenchResult res;
    for (size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> ep_div(cfg.epochs, 0.0), ep_shd(cfg.epochs, 0.0),
            ep_sid(cfg.epochs, 0.0), ep_rdiv(cfg.epochs, 0.0);
        std::vector<double> divs, rdivs;
        for (size_t e = 0; e < cfg.epochs; ++e) {
            for (size_t t = 0; t < cfg.tasks_per_epoch; ++t) {
                const InstOut& o =
                    inst[c * per_cell + e * cfg.tasks_per_epoch + t];
                ep_div[e] += o.div;
                ep_shd[e] += o.shd_v;
                ep_sid[e] += o.sid_v;
                ep_rdiv[e] += o.rdiv;
                divs.push_back(o.div);
                rdivs.push_back(o.rdiv);
            }
            const double inv = 1.0 / static_cast<double>(cfg.tasks_per_epoch);
            ep_div[e] *= inv;
            ep_shd[e] *= inv;
            ep_sid[e] *= inv;
            ep_rdiv[e] *= inv;
        }
        const std::string& label = cells[c].label;
        res.table.rows.push_back(agg_row(label, "olem", "div", ep_div));
        res.table.rows.push_back(agg_row(label, "olem", "shd", ep_shd));
        res.table.rows.push_back(agg_row(label, "olem", "sid", ep_sid));
        res.table.rows.push_back(
            agg_row(label, "random-order", "div", ep_rdiv));
        res.cell_divs.push_back(std::move(divs));
        res.cell_random_divs.push_back(std::move(rdivs));
    }

    res.manifest.tool = "order-bench";
    res.manifest.config_hash = hash_of(cfg.to_json());
    res.manifest.master_seed = seed;
    res.manifest.task_seeds = std::move(seeds);
    json labels = json::array();
    for (const Cell& c : cells) labels.push_back(c.label);
    res.manifest.extra = {{"cells", labels}};
    return res;
}

std::string AufBenchSetting::effective_label() const {
    if (!label.empty()) return label;
    return std::string("syn-") + (gen.linear ? "lr" : "nlr") + "-" +
           noise_tag(gen.noise);
}

void AufBenchSetting::validate() const {
    gen.validate();
    flow.validate();
    opt.validate();
    if (knn_k == 0) throw std::invalid_argument("knn_k must be positive");
}

json AufBenchSetting::to_json() const {
    return {{"linear", gen.linear},
            {"d", gen.d},
            {"edge_density", gen.edge_density},
            {"noise", noise_name(gen.noise)},
            {"tasks", gen.tasks},
            {"rounds", gen.rounds},
            {"eval_trials", gen.eval_trials},
            {"n", gen.n},
            {"mlp_hidden", gen.mlp_hidden},
            {"label", label},
            {"knn_k", knn_k},
            {"flow", flow_to_json(flow)},
            {"opt", opt_to_json(opt)},
            {"run_oracle", run_oracle}};
}

AufBenchSetting AufBenchSetting::from_json(const json& j) {
    AufBenchSetting cfg;
    cfg.gen.linear = j.value("linear", cfg.gen.linear);
    cfg.gen.d = j.value("d", cfg.gen.d);
    cfg.gen.edge_density = j.value("edge_density", cfg.gen.edge_density);
    if (j.contains("noise"))
        cfg.gen.noise = noise_from(j.at("noise").get<std::string>());
    cfg.gen.tasks = j.value("tasks", cfg.gen.tasks);
    cfg.gen.rounds = j.value("rounds", cfg.gen.rounds);
    cfg.gen.eval_trials = j.value("eval_trials", cfg.gen.eval_trials);
    cfg.gen.n = j.value("n", cfg.gen.n);
    cfg.gen.mlp_hidden = j.value("mlp_hidden", cfg.gen.mlp_hidden);
    cfg.label = j.value("label", cfg.label);
    cfg.knn_k = j.value("knn_k", cfg.knn_k);
    if (j.contains("flow")) cfg.flow = flow_from_json(j.at("flow"));
    if (j.contains("opt")) cfg.opt = opt_from_json(j.at("opt"));
    cfg.run_oracle = j.value("run_oracle", cfg.run_oracle);
    cfg.validate();
    return cfg;
}

double true_success(const StructuralModel& m, const AufTask& task,
                    const std::vector<double>& x,
                    const std::vector<double>& z_a, size_t trials,
                    uint64_t seed) {
    if (trials == 0)
        throw std::invalid_argument("true_success: trials must be positive");
    DataMatrix sim = sample_interventional(m, task, x, z_a, trials, seed);
    const std::vector<size_t> outs = task.outcome_nodes();
    Mat y(trials, outs.size());
    for (size_t i = 0; i < trials; ++i)
        for (size_t q = 0; q < outs.size(); ++q) y(i, q) = sim.at(i, outs[q]);
    return estimate_success(y, task.region_m, task.region_d);
}

AufBenchResult run_auf_bench(const AufBenchSetting& cfg, uint64_t seed,
                             size_t jobs) {
    cfg.validate();
    const std::string label = cfg.effective_label();
    const size_t n_tasks = cfg.gen.tasks;
    // The exact conditional sampler only exists for linear mechanisms.
    const bool with_oracle = cfg.run_oracle && cfg.gen.linear;

    std::vector<uint64_t> tseeds(n_tasks);
    for (size_t t = 0; t < n_tasks; ++t)
        tseeds[t] = mix_seed(seed, hash_tag("auf-task"), t);

    struct TaskOut {
        double olem_true = 0, olem_est = 0;
        double noop_true = 0, noop_est = 0;
        double oracle_true = 0, oracle_est = 0;
    };
    std::vector<TaskOut> touts(n_tasks);

    parallel_for(n_tasks, jobs, [&](size_t t) {
        const uint64_t ts = tseeds[t];
        auto [model, task] = gen_auf_task(cfg.gen, ts);
        DataMatrix data = sample_observational(model, cfg.gen.n,
                                               mix_seed(ts, hash_tag("obs")));

        RhConfig rh;
        rh.knn_k = cfg.knn_k;
        rh.jobs = 1;  // tasks already run in the pool
        rh.flow = cfg.flow;
        rh.opt = cfg.opt;
        // Order and flows are fitted once per task; every round reuses them.
        OlemRh pipe(data, task, rh, mix_seed(ts, hash_tag("pipe")));
        JointSampler learned = build_joint_sampler(pipe.stack(), task);

        std::vector<double> noop_z(task.alterable.size(), 0.0);
        for (size_t a = 0; a < task.alterable.size(); ++a) {
            double s = 0.0;
            for (size_t i = 0; i < data.n; ++i)
                s += data.at(i, task.alterable[a]);
            noop_z[a] = s / static_cast<double>(data.n);
        }

        std::optional<JointSampler> oracle;
        if (with_oracle)
            oracle.emplace(exact_joint_sampler(
                model, topological_order(model.graph), task));

        TaskOut acc;
        for (size_t r = 0; r < cfg.gen.rounds; ++r) {
            const uint64_t rs = mix_seed(ts, hash_tag("round"), r);
            DataMatrix ctx = sample_observational(
                model, 1, mix_seed(rs, hash_tag("ctx")));
            std::vector<double> x;
            for (size_t node : task.context_nodes())
                x.push_back(ctx.at(0, node));

            DecisionResult dec = pipe.decide(x, mix_seed(rs, hash_tag("dec")));
            acc.olem_true +=
                true_success(model, task, x, dec.z_star, cfg.gen.eval_trials,
                             mix_seed(rs, hash_tag("true")));
            acc.olem_est += dec.est_success;

            acc.noop_true +=
                true_success(model, task, x, noop_z, cfg.gen.eval_trials,
                             mix_seed(rs, hash_tag("noop-true")));
            Rng er = stream(mix_seed(rs, hash_tag("noop-est")), "eval");
            Mat en = normal_mat(cfg.opt.n_noise, model.dim(), er);
            acc.noop_est += estimate_success(learned, en, x, noop_z,
                                             task.region_m, task.region_d);

            if (oracle) {
                DecisionResult od = optimize_decision(
                    *oracle, task, x, cfg.opt, mix_seed(rs, hash_tag("oracle")));
                acc.oracle_true += true_success(
                    model, task, x, od.z_star, cfg.gen.eval_trials,
                    mix_seed(rs, hash_tag("oracle-true")));
                acc.oracle_est += od.est_success;
            }
        }
        const double inv = 1.0 / static_cast<double>(cfg.gen.rounds);
        acc.olem_true *= inv;
        acc.olem_est *= inv;
        acc.noop_true *= inv;
        acc.noop_est *= inv;
        acc.oracle_true *= inv;
        acc.oracle_est *= inv;
        touts[t] = acc;
    });

    AufBenchResult res;
    std::vector<double> v(n_tasks);
    auto collect = [&](double TaskOut::*field) {
        for (size_t t = 0; t < n_tasks; ++t) v[t] = touts[t].*field;
        return v;
    };
    res.table.rows.push_back(
        agg_row(label, "olem-rh", "success", collect(&TaskOut::olem_true)));
    res.task_olem = v;
    res.table.rows.push_back(agg_row(label, "olem-rh", "est-success",
                                     collect(&TaskOut::olem_est)));
    res.table.rows.push_back(
        agg_row(label, "no-op", "success", collect(&TaskOut::noop_true)));
    res.task_noop = v;
    res.table.rows.push_back(
        agg_row(label, "no-op", "est-success", collect(&TaskOut::noop_est)));
    if (with_oracle) {
        res.table.rows.push_back(agg_row(label, "oracle-rh", "success",
                                         collect(&TaskOut::oracle_true)));
        res.task_oracle = v;
        res.table.rows.push_back(agg_row(label, "oracle-rh", "est-success",
                                         collect(&TaskOut::oracle_est)));
    }

    res.manifest.tool = "auf-bench";
    res.manifest.config_hash = hash_of(cfg.to_json());
    res.manifest.master_seed = seed;
    res.manifest.task_seeds = std::move(tseeds);
    res.manifest.extra = {{"label", label}, {"oracle", with_oracle}};
    return res;
}

namespace {

// The flow-cytometry files circulate with assay-style column names; map
// both those and the plain protein names onto one canonical set.
std::string canon_protein(const std::string& raw) {
    std::string key;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c)) && c != '"')
            key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const std::map<std::string, std::string> aliases = {
        {"praf", "Raf"},      {"raf", "Raf"},   {"pmek", "Mek"},
        {"mek", "Mek"},       {"plcg", "Plcg"}, {"plc", "Plcg"},
        {"pip2", "PIP2"},     {"pip3", "PIP3"}, {"p44/42", "Erk"},
        {"p4442", "Erk"},     {"erk", "Erk"},   {"pakts473", "Akt"},
        {"akt", "Akt"},       {"pka", "PKA"},   {"pkc", "PKC"},
        {"p38", "P38"},       {"pjnk", "Jnk"},  {"jnk", "Jnk"}};
    auto it = aliases.find(key);
    if (it == aliases.end())
        throw std::runtime_error("unknown protein column '" + raw + "'");
    return it->second;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

SachsData ingest_sachs(const std::string& csv_path,
                       const std::string& truth_path, bool log_transform,
                       bool standardize) {
    std::ifstream f(csv_path);
    if (!f) throw std::runtime_error(csv_path + ": cannot open data file");

    std::string line;
    if (!std::getline(f, line))
        throw std::runtime_error(csv_path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    SachsData out;
    std::vector<std::string> headers = split_csv_line(line);
    out.column_map = json::object();
    for (size_t j = 0; j < headers.size(); ++j) {
        const std::string raw = trim(headers[j]);
        const std::string canon = canon_protein(raw);
        for (const std::string& seen : out.names)
            if (seen == canon)
                throw std::runtime_error(csv_path + ": duplicate column '" +
                                         raw + "'");
        out.names.push_back(canon);
        out.column_map[raw] = j;
    }
    const size_t d = out.names.size();

    std::vector<double> values;
    size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != d)
            throw std::runtime_error(
                csv_path + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(d) + " fields, got " +
                std::to_string(fields.size()));
        for (size_t j = 0; j < d; ++j) {
            const std::string cell = trim(fields[j]);
            size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty())
                throw std::runtime_error(
                    csv_path + ":" + std::to_string(line_no) +
                    ": non-numeric value '" + cell + "' in column " +
                    out.names[j]);
            values.push_back(v);
        }
    }
    const size_t n = values.size() / d;
    out.raw_rows = n;
    if (n == 0) throw std::runtime_error(csv_path + ": no data rows");
    if (n != 853 || d != 11)
        std::cerr << "ingest_sachs: expected 853x11, got " << n << "x" << d
                  << "\n";

    out.data = DataMatrix(n, d);
    out.data.values = std::move(values);

    if (log_transform) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) {
                const double v = out.data.at(i, j);
                if (!(v > 0.0))
                    throw std::runtime_error(
                        csv_path + ": log transform needs positive values; "
                        "found " + fmt6(v) + " in column " + out.names[j]);
                out.data.at(i, j) = std::log(v);
            }
    }
    if (standardize) {
        for (size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (size_t i = 0; i < n; ++i) m += out.data.at(i, j);
            m /= static_cast<double>(n);
            double s2 = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double c = out.data.at(i, j) - m;
                s2 += c * c;
            }
            const double sd = std::sqrt(s2 / static_cast<double>(n));
            if (!(sd > 0.0))
                throw std::runtime_error(csv_path +
                                         ": constant column " + out.names[j] +
                                         " cannot be standardized");
            for (size_t i = 0; i < n; ++i)
                out.data.at(i, j) = (out.data.at(i, j) - m) / sd;
        }
    }
    out.log_transform = log_transform;
    out.standardize = standardize;

    // Reference edge list: one "from to" pair per line, names as in the CSV.
    std::ifstream tf(truth_path);
    if (!tf)
        throw std::runtime_error(truth_path + ": cannot open edge list");
    out.truth = Dag(d);
    auto index_of = [&](const std::string& name, size_t tline) {
        const std::string canon = canon_protein(name);
        for (size_t j = 0; j < d; ++j)
            if (out.names[j] == canon) return j;
        throw std::runtime_error(truth_path + ":" + std::to_string(tline) +
                                 ": column '" + name +
                                 "' missing from the data file");
    };
    size_t tline = 0;
    while (std::getline(tf, line)) {
        ++tline;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        std::stringstream ss(body);
        std::string a, b, rest;
        if (!(ss >> a >> b) || (ss >> rest))
            throw std::runtime_error(truth_path + ":" + std::to_string(tline) +
                                     ": expected 'from to'");
        out.truth.add_edge(index_of(a, tline), index_of(b, tline));
    }
    topological_order(out.truth);  // rejects cyclic reference lists
    return out;
}

void SachsBenchConfig::validate() const {
    if (runs == 0) throw std::invalid_argument("sachs bench needs runs >= 1");
    if (knn_k == 0) throw std::invalid_argument("knn_k must be positive");
}

json SachsBenchConfig::to_json() const {
    return {{"runs", runs},
            {"knn_k", knn_k},
            {"prune", prune_to_json(prune)}};
}

SachsBenchConfig SachsBenchConfig::from_json(const json& j) {
    SachsBenchConfig cfg;
    cfg.runs = j.value("runs", cfg.runs);
    cfg.knn_k = j.value("knn_k", cfg.knn_k);
    if (j.contains("prune")) cfg.prune = prune_from_json(j.at("prune"));
    cfg.validate();
    return cfg;
}

SachsBenchResult run_sachs_bench(const SachsData& data,
                                 const SachsBenchConfig& cfg, uint64_t seed,
                                 size_t jobs) {
    cfg.validate();
    if (data.data.n == 0)
        throw std::invalid_argument("run_sachs_bench: no data");

    std::vector<uint64_t> rseeds(cfg.runs);
    for (size_t r = 0; r < cfg.runs; ++r)
        rseeds[r] = mix_seed(seed, hash_tag("sachs-run"), r);

    std::vector<double> divs(cfg.runs), shds(cfg.runs), sids(cfg.runs);
    parallel_for(cfg.runs, jobs, [&](size_t r) {
        const uint64_t rs = rseeds[r];
        std::vector<size_t> perm = stream(rs, "shuffle").permutation(data.data.n);
        DataMatrix shuf(data.data.n, data.data.d);
        for (size_t i = 0; i < data.data.n; ++i)
            for (size_t j = 0; j < data.data.d; ++j)
                shuf.at(i, j) = data.data.at(perm[i], j);
        EntropySource src = EntropySource::empirical(
            shuf, cfg.knn_k, mix_seed(rs, hash_tag("jitter")));
        Order order = learn_order(src, 1);
        PrunedGraph pg = prune_to_dag(order, shuf, cfg.prune);
        divs[r] = static_cast<double>(div_metric(order, data.truth));
        shds[r] = static_cast<double>(shd(pg.graph, data.truth));
        sids[r] = static_cast<double>(sid(pg.graph, data.truth));
    });

    SachsBenchResult res;
    res.table.rows.push_back(agg_row("sachs", "olem", "div", divs));
    res.table.rows.push_back(agg_row("sachs", "olem", "shd", shds));
    res.table.rows.push_back(agg_row("sachs", "olem", "sid", sids));
    res.run_divs = divs;

    res.manifest.tool = "sachs";
    res.manifest.config_hash = hash_of(cfg.to_json());
    res.manifest.master_seed = seed;
    res.manifest.task_seeds = std::move(rseeds);
    res.manifest.extra = {{"column_map", data.column_map},
                          {"log_transform", data.log_transform},
                          {"standardize", data.standardize},
                          {"rows", data.raw_rows},
                          {"cols", data.data.d}};
    return res;
}

json results_to_json(const ResultTable& table, const RunManifest& manifest) {
    table.validate();
    json rows = json::array();
    for (const ResultRow& r : table.rows)
        rows.push_back({{"setting", r.setting},
                        {"method", r.method},
                        {"metric", r.metric},
                        {"mean", r.mean},
                        {"std", r.std_dev},
                        {"n_runs", r.n_runs}});
    return {{"manifest", manifest.to_json()}, {"rows", rows}};
}

std::pair<ResultTable, RunManifest> results_from_json(const json& j) {
    ResultTable table;
    for (const json& row : j.at("rows")) {
        ResultRow r;
        r.setting = row.at("setting").get<std::string>();
        r.method = row.at("method").get<std::string>();
        r.metric = row.at("metric").get<std::string>();
        r.mean = row.at("mean").get<double>();
        r.std_dev = row.at("std").get<double>();
        r.n_runs = row.at("n_runs").get<size_t>();
        table.rows.push_back(std::move(r));
    }
    table.validate();
    return {table, RunManifest::from_json(j.at("manifest"))};
}

std::string results_to_csv(const ResultTable& table,
                           const RunManifest& manifest) {
    table.validate();
    std::string out = "# manifest: " + manifest.to_json().dump() + "\n";
    out += "setting,method,metric,mean,std,n_runs\n";
    for (const ResultRow& r : table.rows) {
        out += r.setting + "," + r.method + "," + r.metric + "," +
               fmt6(r.mean) + "," + fmt6(r.std_dev) + "," +
               std::to_string(r.n_runs) + "\n";
    }
    return out;
}

void emit_results(const ResultTable& table, const RunManifest& manifest,
                  const std::string& path, const std::string& format) {
    std::string body;
    if (format == "csv") {
        body = results_to_csv(table, manifest);
    } else if (format == "json") {
        body = results_to_json(table, manifest).dump(2);
        body += "\n";
    } else {
        throw std::invalid_argument("emit_results: format must be csv or "
                                    "json, got '" + format + "'");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    f << body;
    if (!f) throw std::runtime_error(path + ": write failed");
}

}  // namespace auf
