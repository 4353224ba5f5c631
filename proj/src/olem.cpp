#include "auf/olem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "auf/parallel.hpp"
#include "auf/special.hpp"

namespace auf {

size_t EntropySource::dim() const {
    if (oracle != nullptr) return oracle->cov.rows();
    if (data != nullptr) return data->d;
    throw std::invalid_argument("EntropySource: empty");
}

Order learn_order(const EntropySource& src, size_t jobs) {
    const size_t d = src.dim();
    if (d == 0) throw std::invalid_argument("learn_order: d >= 1");
    std::optional<EntropyCache> cache;
    if (src.oracle == nullptr)
        cache.emplace(*src.data, src.k, src.jitter_seed);

    std::vector<size_t> remaining(d);
    for (size_t i = 0; i < d; ++i) remaining[i] = i;
    std::vector<size_t> reversed;
    reversed.reserve(d);

    while (remaining.size() > 1) {
        const size_t s = remaining.size();
        // Criterion for removing candidate c: entropy of the others.
        std::vector<std::vector<size_t>> subsets(s);
        for (size_t c = 0; c < s; ++c) {
            auto& sub = subsets[c];
            sub.reserve(s - 1);
            for (size_t t = 0; t < s; ++t)
                if (t != c) sub.push_back(remaining[t]);
        }
        std::vector<double> crit(s);
        if (src.oracle != nullptr) {
            parallel_for(s, jobs, [&](size_t c) {
                crit[c] = gaussian_entropy(*src.oracle, subsets[c]);
            });
        } else {
            cache->prefetch(subsets, jobs);
            for (size_t c = 0; c < s; ++c)
                crit[c] = cache->subset_entropy(subsets[c]);
        }
        size_t best = 0;
        for (size_t c = 1; c < s; ++c) {
            if (src.oracle != nullptr) {
                if (crit[c] < crit[best] - 1e-12) best = c;
            } else {
                if (crit[c] < crit[best]) best = c;
            }
        }
        reversed.push_back(remaining[best]);
        remaining.erase(remaining.begin() + static_cast<ptrdiff_t>(best));
    }
    reversed.push_back(remaining.front());
    std::reverse(reversed.begin(), reversed.end());
    return Order::from_perm(std::move(reversed));
}

namespace {

// Per-predecessor basis expansion. Linear: the raw column. Spline: cubic
// truncated-power basis x, x^2, x^3, (x - q_t)_+^3 with interior knots at
// quantiles of the predecessor's values.
std::vector<std::vector<double>> basis_columns(const std::vector<double>& x,
                                               const PruneConfig& cfg) {
    std::vector<std::vector<double>> cols;
    cols.push_back(x);
    if (!cfg.spline_basis) return cols;
    const size_t n = x.size();
    std::vector<double> sq(n), cu(n);
    for (size_t i = 0; i < n; ++i) {
        sq[i] = x[i] * x[i];
        cu[i] = sq[i] * x[i];
    }
    cols.push_back(std::move(sq));
    cols.push_back(std::move(cu));
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    for (size_t t = 1; t <= cfg.spline_knots; ++t) {
        const double q = static_cast<double>(t) / (cfg.spline_knots + 1);
        const double knot = sorted[static_cast<size_t>(q * (n - 1))];
        std::vector<double> col(n);
        for (size_t i = 0; i < n; ++i) {
            const double v = x[i] - knot;
            col[i] = v > 0.0 ? v * v * v : 0.0;
        }
        cols.push_back(std::move(col));
    }
    return cols;
}

}  // namespace

PrunedGraph prune_to_dag(const Order& order, const DataMatrix& data,
                         const PruneConfig& cfg) {
    if (order.size() != data.d)
        throw std::invalid_argument("prune_to_dag: order/data dimension");
    PrunedGraph out;
    out.order = order;
    out.cutoff = cfg.cutoff;
    out.graph = Dag(data.d);
    const size_t n = data.n;

    for (size_t pos = 1; pos < order.size(); ++pos) {
        const size_t node = order.perm[pos];
        const std::vector<double> y = data.column(node);
        std::vector<size_t> preds(order.perm.begin(),
                                  order.perm.begin() + static_cast<ptrdiff_t>(pos));
        // Design: intercept, then each predecessor's basis group.
        std::vector<std::vector<double>> groups_cols;
        std::vector<std::pair<size_t, size_t>> group_span;  // [begin, end)
        size_t total = 1;
        for (size_t j : preds) {
            auto basis = basis_columns(data.column(j), cfg);
            group_span.emplace_back(total, total + basis.size());
            total += basis.size();
            for (auto& b : basis) groups_cols.push_back(std::move(b));
        }
        Mat design(n, total);
        for (size_t i = 0; i < n; ++i) design(i, 0) = 1.0;
        for (size_t c = 0; c + 1 < total; ++c)
            for (size_t i = 0; i < n; ++i) design(i, c + 1) = groups_cols[c][i];

        const auto full = lstsq(design, y);
        const double df_resid = static_cast<double>(n) - full.rank;
        if (df_resid <= 0.0) continue;  // saturated fit, keep nothing

        for (size_t g = 0; g < preds.size(); ++g) {
            const auto [b, e] = group_span[g];
            Mat reduced(n, total - (e - b));
            size_t cc = 0;
            for (size_t c = 0; c < total; ++c) {
                if (c >= b && c < e) continue;
                for (size_t i = 0; i < n; ++i) reduced(i, cc) = design(i, c);
                ++cc;
            }
            const auto red = lstsq(reduced, y);
            const double q = static_cast<double>(full.rank) - red.rank;
            if (q < 1.0) continue;  // group adds no rank: no evidence
            const double num = (red.rss - full.rss) / q;
            const double den = full.rss / df_resid;
            double p;
            if (den <= 0.0) {
                // Perfect fit; any reduction in rss is infinitely significant.
                p = red.rss > full.rss ? 0.0 : 1.0;
            } else {
                p = f_test_pvalue(num / den, q, df_resid);
            }
            if (p < cfg.cutoff) out.graph.add_edge(preds[g], node);
        }
    }
    return out;
}

AssumptionReport check_assumption_olem(const StructuralModel& m) {
    if (!is_linear_gaussian(m))
        throw std::invalid_argument(
            "check_assumption_olem: linear-Gaussian models only");
    const size_t d = m.dim();
    AssumptionReport report;
    if (d <= 1) return report;
    const GaussianOracle oracle{linear_gaussian_covariance(m)};
    const Order pi = topological_order(m.graph);

    for (size_t pm = 2; pm <= d; ++pm) {
        std::vector<size_t> prefix(pi.perm.begin(),
                                   pi.perm.begin() + static_cast<ptrdiff_t>(pm));
        std::vector<char> in_prefix(d, 0);
        for (size_t v : prefix) in_prefix[v] = 1;
        // Sinks of the induced subgraph: no child inside the prefix.
        std::vector<char> is_sink(d, 0);
        for (size_t v : prefix) {
            bool sink = true;
            for (size_t c : m.graph.children(v)) sink = sink && !in_prefix[c];
            is_sink[v] = sink;
        }
        std::sort(prefix.begin(), prefix.end());
        for (size_t i : prefix) {
            if (!is_sink[i]) continue;
            for (size_t j : prefix) {
                if (is_sink[j]) continue;
                const double mi =
                    gaussian_conditional_mi(oracle, j, prefix, m.noises[j].a);
                const double gap = std::log(m.noises[j].a / m.noises[i].a);
                if (!(mi > gap)) {
                    report.holds = false;
                    report.prefix_m = pm;
                    report.sink = i;
                    report.non_sink = j;
                    report.mi = mi;
                    report.entropy_gap = gap;
                    return report;
                }
            }
        }
    }
    return report;
}

}  // namespace auf
