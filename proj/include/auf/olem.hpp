#pragma once

#include <cstdint>
#include <optional>

#include "auf/entropy.hpp"
#include "auf/scm.hpp"

namespace auf {

// Where order learning gets its entropies: sample-based estimates or the
// closed-form Gaussian oracle.
struct EntropySource {
    const DataMatrix* data = nullptr;
    size_t k = 1;
    uint64_t jitter_seed = 0;
    const GaussianOracle* oracle = nullptr;

    static EntropySource empirical(const DataMatrix& d, size_t k = 1,
                                   uint64_t jitter_seed = 0) {
        return {&d, k, jitter_seed, nullptr};
    }
    static EntropySource analytic(const GaussianOracle& o) {
        return {nullptr, 1, 0, &o};
    }
    size_t dim() const;
};

// Recursive sink identification: repeatedly remove the node i minimizing
// h(V_{rest}) (equivalently maximizing h(V_i | V_{rest})) and prepend it.
// Oracle mode treats criteria within 1e-12 as tied and keeps the lower
// index; empirical estimates are compared exactly. `jobs` parallelizes the
// per-candidate entropy evaluations without changing results.
Order learn_order(const EntropySource& src, size_t jobs = 1);

struct PruneConfig {
    double cutoff = 0.001;
    bool spline_basis = true;  // cubic expansion per predecessor
    size_t spline_knots = 3;   // interior knots at quantiles
};

struct PrunedGraph {
    Dag graph;
    Order order;
    double cutoff = 0.0;
};

// Regress each variable on its order predecessors (basis-expanded when
// configured) and keep edge j->i iff the group F-test for j's columns has
// p < cutoff. Rank-deficient groups that add no fit are dropped.
PrunedGraph prune_to_dag(const Order& order, const DataMatrix& data,
                         const PruneConfig& cfg = {});

struct AssumptionReport {
    bool holds = true;
    // Populated for the first violation found.
    size_t prefix_m = 0;
    size_t sink = 0;
    size_t non_sink = 0;
    double mi = 0.0;
    double entropy_gap = 0.0;
};

// Closed-form information-gap check for linear-Gaussian models: over one
// topological order's prefixes, every (sink i, non-sink j) pair must satisfy
// I(V_j; descendants | rest) > h(eps_j) - h(eps_i).
AssumptionReport check_assumption_olem(const StructuralModel& m);

}  // namespace auf
