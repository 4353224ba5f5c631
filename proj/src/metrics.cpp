#include "auf/metrics.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace auf {

size_t div_metric(const Order& order, const Dag& g_true) {
    if (order.size() != g_true.num_nodes())
        throw std::invalid_argument("div: dimension mismatch");
    size_t count = 0;
    for (const auto& [i, j] : g_true.edges())
        if (order.inverse[i] > order.inverse[j]) ++count;
    return count;
}

size_t shd(const Dag& g_est, const Dag& g_true) {
    const size_t d = g_est.num_nodes();
    if (d != g_true.num_nodes())
        throw std::invalid_argument("shd: dimension mismatch");
    size_t count = 0;
    for (size_t a = 0; a < d; ++a) {
        for (size_t b = a + 1; b < d; ++b) {
            // 0 = none, 1 = a->b, 2 = b->a per graph.
            const int se = g_est.has_edge(a, b) ? 1 : g_est.has_edge(b, a) ? 2 : 0;
            const int st =
                g_true.has_edge(a, b) ? 1 : g_true.has_edge(b, a) ? 2 : 0;
            if (se != st) ++count;
        }
    }
    return count;
}

bool d_separated(const Dag& g, size_t a, size_t b,
                 const std::vector<size_t>& z) {
    const size_t d = g.num_nodes();
    std::vector<char> in_z(d, 0);
    for (size_t v : z) in_z[v] = 1;
    if (in_z[a] || in_z[b])
        throw std::invalid_argument("d_separated: endpoint conditioned");

    // Ancestral closure of z: nodes from which z is reachable by edges.
    std::vector<char> anc_z(d, 0);
    {
        std::vector<size_t> stack(z.begin(), z.end());
        for (size_t v : z) anc_z[v] = 1;
        while (!stack.empty()) {
            const size_t u = stack.back();
            stack.pop_back();
            for (size_t p : g.parents(u)) {
                if (!anc_z[p]) {
                    anc_z[p] = 1;
                    stack.push_back(p);
                }
            }
        }
    }

    // Reachability over active trails; state (node, arrived-downward?).
    std::vector<std::array<char, 2>> seen(d, {0, 0});
    std::vector<std::pair<size_t, int>> stack;
    constexpr int kUp = 0, kDown = 1;
    stack.emplace_back(a, kUp);
    seen[a][kUp] = 1;
    while (!stack.empty()) {
        const auto [v, dir] = stack.back();
        stack.pop_back();
        if (v == b && !in_z[v]) return false;
        auto push = [&](size_t u, int dr) {
            if (!seen[u][dr]) {
                seen[u][dr] = 1;
                stack.emplace_back(u, dr);
            }
        };
        if (dir == kUp) {
            if (in_z[v]) continue;
            for (size_t p : g.parents(v)) push(p, kUp);
            for (size_t c : g.children(v)) push(c, kDown);
        } else {
            if (!in_z[v])
                for (size_t c : g.children(v)) push(c, kDown);
            if (anc_z[v])
                for (size_t p : g.parents(v)) push(p, kUp);
        }
    }
    return true;
}

namespace {

std::vector<std::vector<char>> descendant_table(const Dag& g) {
    const size_t d = g.num_nodes();
    std::vector<std::vector<char>> de(d, std::vector<char>(d, 0));
    for (size_t i = 0; i < d; ++i)
        for (size_t v : descendants(g, i)) de[i][v] = 1;
    return de;
}

}  // namespace

size_t sid(const Dag& g_est, const Dag& g_true) {
    const size_t d = g_est.num_nodes();
    if (d != g_true.num_nodes())
        throw std::invalid_argument("sid: dimension mismatch");
    topological_order(g_est);
    topological_order(g_true);
    const auto de = descendant_table(g_true);

    size_t count = 0;
    for (size_t i = 0; i < d; ++i) {
        const auto& z = g_est.parents(i);
        std::vector<char> in_z(d, 0);
        for (size_t v : z) in_z[v] = 1;
        for (size_t j = 0; j < d; ++j) {
            if (j == i) continue;
            if (in_z[j]) {
                // The estimate declares no effect of i on j; wrong iff j is
                // truly downstream of i.
                if (de[i][j]) ++count;
                continue;
            }
            // Nodes on proper causal paths i -> ... -> j.
            std::vector<char> causal(d, 0);
            bool has_causal = false;
            for (size_t w = 0; w < d; ++w) {
                if (w == i || !de[i][w]) continue;
                if (w == j || de[w][j]) {
                    causal[w] = 1;
                    has_causal = true;
                }
            }
            bool valid = true;
            if (has_causal) {
                for (size_t v : z) {
                    if (causal[v]) valid = false;
                    for (size_t w = 0; w < d && valid; ++w)
                        if (causal[w] && de[w][v]) valid = false;
                    if (!valid) break;
                }
            }
            if (valid) {
                // Proper back-door graph: cut i's edges into causal nodes.
                Dag pbd(d);
                for (const auto& [u, v] : g_true.edges())
                    if (!(u == i && causal[v])) pbd.add_edge(u, v);
                valid = d_separated(pbd, i, j, z);
            }
            if (!valid) ++count;
        }
    }
    return count;
}

}  // namespace auf
