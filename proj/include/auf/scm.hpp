#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "auf/dense.hpp"
#include "auf/rng.hpp"

namespace auf {

// Directed acyclic graph over nodes 0..d-1. Edges are validated lazily:
// add_edge rejects self-loops and duplicates, topological_order rejects
// cycles.
class Dag {
public:
    Dag() = default;
    explicit Dag(size_t d) : parents_(d), children_(d) {}

    size_t num_nodes() const { return parents_.size(); }
    size_t num_edges() const { return num_edges_; }
    void add_edge(size_t from, size_t to);
    bool has_edge(size_t from, size_t to) const;
    const std::vector<size_t>& parents(size_t i) const { return parents_.at(i); }
    const std::vector<size_t>& children(size_t i) const {
        return children_.at(i);
    }
    std::vector<std::pair<size_t, size_t>> edges() const;

private:
    std::vector<std::vector<size_t>> parents_;
    std::vector<std::vector<size_t>> children_;
    size_t num_edges_ = 0;
};

struct Order {
    std::vector<size_t> perm;     // perm[k] = node at position k
    std::vector<size_t> inverse;  // inverse[node] = position

    static Order from_perm(std::vector<size_t> perm);
    size_t size() const { return perm.size(); }
    // Nodes placed before `node` in this order.
    std::vector<size_t> predecessors(size_t node) const;
};

// Kahn's algorithm with an index-ordered frontier, so ties break toward the
// lowest node index. Throws on cycles.
Order topological_order(const Dag& g);

// Transitive descendants of i, excluding i, ascending.
std::vector<size_t> descendants(const Dag& g, size_t i);

enum class NoiseFamily { gaussian, beta, exponential };

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::gaussian;
    // gaussian: a = sigma. exponential: a = rate. beta: a, b = shape params.
    double a = 1.0;
    double b = 1.0;
    // Shift samples so the noise has mean zero.
    bool centering = false;

    double mean_raw() const;
    double sample(Rng& rng) const;
    // Inverse CDF at u in (0,1), with the same centering shift applied.
    double quantile(double u) const;
    void validate() const;
};

struct LinearFn {
    std::vector<double> weights;  // aligned with the parent list
};

// One RBF-kernel sample path pinned at anchor inputs; evaluation anywhere
// else is the posterior mean given the anchored values, f(u) = k(u, A) alpha.
struct GpFn {
    Mat anchors;                // n_anchor x m parent rows
    std::vector<double> alpha;  // (K + jitter I)^{-1} g
    double jitter = 1e-8;
};

struct MlpFn {
    // Three weight layers m -> h -> h -> 1, sigmoid on hidden, linear out,
    // zero biases. Row-major matrices.
    size_t in = 0;
    size_t hidden = 0;
    std::vector<double> w1;  // h x in
    std::vector<double> w2;  // h x h
    std::vector<double> w3;  // 1 x h
};

// Structural assignment for one node: value = eval(parent values) + noise.
// Root nodes carry no function (monostate) and evaluate to 0.
struct StructuralFn {
    std::vector<size_t> parents;
    std::variant<std::monostate, LinearFn, GpFn, MlpFn> impl;

    double eval(const double* pa) const;
};

struct StructuralModel {
    Dag graph;
    std::vector<StructuralFn> functions;
    std::vector<NoiseSpec> noises;

    size_t dim() const { return graph.num_nodes(); }
    // Checks that each function reads exactly its node's parent set.
    void validate() const;
};

struct DataMatrix {
    size_t n = 0;
    size_t d = 0;
    std::vector<double> values;  // row-major n x d

    DataMatrix() = default;
    DataMatrix(size_t n_, size_t d_) : n(n_), d(d_), values(n_ * d_, 0.0) {}
    double& at(size_t i, size_t j) { return values[i * d + j]; }
    double at(size_t i, size_t j) const { return values[i * d + j]; }
    std::vector<double> column(size_t j) const;
};

DataMatrix sample_observational(const StructuralModel& m, size_t n,
                                uint64_t seed);

enum class Role { context, intermediate, outcome };

struct AufTask {
    std::vector<Role> roles;                       // per node
    std::vector<size_t> alterable;                 // subset of intermediates
    std::vector<std::array<double, 2>> domain;     // per alterable [lo, hi]
    Mat region_m;                                  // rows x |outcomes|
    std::vector<double> region_d;

    std::vector<size_t> context_nodes() const;
    std::vector<size_t> outcome_nodes() const;
    void validate(const Dag& g) const;
};

// Simulates the model in topological order, overwriting context nodes with x
// (in ascending node order of the context set) and alterable nodes with z_a.
DataMatrix sample_interventional(const StructuralModel& m, const AufTask& task,
                                 const std::vector<double>& x,
                                 const std::vector<double>& z_a, size_t n,
                                 uint64_t seed);

bool is_linear_gaussian(const StructuralModel& m);

// Joint covariance of a linear-Gaussian model: with V = B V + eps,
// Sigma = (I-B)^{-1} D (I-B)^{-T}, D = diag(sigma_i^2).
Mat linear_gaussian_covariance(const StructuralModel& m);

// Mean and covariance after forcing nodes `fixed` to `values` (incoming
// edges cut, noise removed on those rows).
struct GaussianMoments {
    std::vector<double> mean;
    Mat cov;
};
GaussianMoments linear_gaussian_interventional(const StructuralModel& m,
                                               const std::vector<size_t>& fixed,
                                               const std::vector<double>& values);

nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const StructuralModel& m);
StructuralModel model_from_json(const nlohmann::json& j);
nlohmann::json task_to_json(const AufTask& t);
AufTask task_from_json(const nlohmann::json& j);
nlohmann::json order_to_json(const Order& o);
Order order_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const Dag& g);
Dag graph_from_json(const nlohmann::json& j);

}  // namespace auf
