#pragma once

#include <cstdint>
#include <utility>

#include "auf/scm.hpp"

namespace auf {

// Coefficient sampling range. signed_band draws the magnitude from [lo, hi]
// and flips a fair sign, giving the two-sided band [-hi,-lo] U [lo,hi];
// otherwise the draw is plain U[lo, hi].
struct CoeffRange {
    double lo = 0.0;
    double hi = 1.0;
    bool signed_band = false;

    static CoeffRange banded(double lo, double hi) { return {lo, hi, true}; }
    static CoeffRange plain(double lo, double hi) { return {lo, hi, false}; }
};

struct OrderBenchConfig {
    size_t d = 10;
    double edge_density = 0.3;
    double linearity = 1.0;  // per-node probability of a linear function
    NoiseFamily noise = NoiseFamily::gaussian;
    size_t n = 2000;
    size_t epochs = 5;
    size_t tasks_per_epoch = 4;
    size_t n_anchor = 256;  // anchor count for sampled nonlinear functions

    void validate() const;
};

struct AufBenchConfig {
    bool linear = true;
    size_t d = 15;  // 15 linear / 12 nonlinear in the reference protocol
    double edge_density = 0.3;
    NoiseFamily noise = NoiseFamily::beta;
    size_t tasks = 20;
    size_t rounds = 50;
    size_t eval_trials = 1000;
    size_t n = 1000;
    size_t mlp_hidden = 8;

    void validate() const;
};

// Uniform random node permutation; each forward pair becomes an edge
// independently with probability p.
Dag gen_er_dag(size_t d, double p, uint64_t seed);

LinearFn gen_linear_fn(size_t n_parents, uint64_t seed, const CoeffRange& range);

// One unit-bandwidth RBF sample path pinned at the given anchor inputs.
// Escalates diagonal jitter on Cholesky failure.
GpFn gen_gp_fn(const Mat& anchor_rows, uint64_t seed);

MlpFn gen_mlp_fn(size_t n_parents, uint64_t seed, size_t hidden = 8);

// gaussian: sigma ~ U[0.75,1.25]; exponential: rate ~ U[0.75,1.25];
// beta: both shapes ~ U[0.75,1.25].
NoiseSpec gen_noise(NoiseFamily family, uint64_t seed);

// Order-learning benchmark instance: ER graph, per-node Bernoulli(linearity)
// choice of linear vs sampled-RBF function, roots pure noise. Nonlinear
// functions are anchored at parent rows realized by an internal simulation.
StructuralModel gen_order_task(const OrderBenchConfig& cfg, uint64_t seed);

// Decision benchmark instance. Roles follow the topological order: the
// first ceil(d/5) nodes are context, the last ceil(d/5) outcomes, the rest
// intermediate. Alterable set is the union over outcomes of their
// intermediate ancestors, each kept with probability 1/2; domains and the
// desired region come from empirical moments of a drawn dataset.
std::pair<StructuralModel, AufTask> gen_auf_task(const AufBenchConfig& cfg,
                                                 uint64_t seed);

}  // namespace auf
