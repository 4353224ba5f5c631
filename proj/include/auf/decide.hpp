#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "auf/flow.hpp"
#include "auf/olem.hpp"
#include "auf/scm.hpp"

namespace auf {

struct OptConfig {
    size_t n_noise = 1000;  // Monte Carlo rows per restart
    double lr = 0.5;
    size_t iterations = 200;
    size_t restarts = 3;

    void validate() const;
};

struct ChebyshevResult {
    std::vector<double> center;
    double radius = 0.0;
};

// Largest inscribed ball of {y : M y <= d}: max r s.t. M_k c + r ||M_k|| <=
// d_k, r >= 0. Axis-aligned boxes take a closed-form midpoint path; general
// polytopes go through a dense two-phase simplex with Bland's rule. Throws
// on empty or unbounded regions and on zero rows.
ChebyshevResult chebyshev_center(const Mat& m, const std::vector<double>& d);

// Fraction of outcome rows y with M y <= d componentwise (1e-12 slack).
// A constraint-free region accepts everything.
double estimate_success(const Mat& y, const Mat& m,
                        const std::vector<double>& d);
double estimate_success(const JointSampler& t, const Mat& noises,
                        const std::vector<double>& x,
                        const std::vector<double>& z_a, const Mat& m,
                        const std::vector<double>& d);

struct DecisionResult {
    std::vector<double> z_star;  // within the decision box componentwise
    std::vector<double> trace;   // surrogate objective per iteration
    double est_success = 0.0;    // sampler-estimated at z_star
    // Simulator-evaluated success; NaN until a caller with ground truth
    // fills it in.
    double true_success = std::numeric_limits<double>::quiet_NaN();
};

// Minimizes the sampled L1 distance of the outcomes to the region's
// Chebyshev center over the decision box: Adam on a frozen noise batch per
// restart, componentwise clamp after each step (outside the tape), winner
// picked by estimated success on one shared evaluation batch. Restart 0
// starts at the box midpoint, the rest at uniform draws.
DecisionResult optimize_decision(const JointSampler& t, const AufTask& task,
                                 const std::vector<double>& x,
                                 const OptConfig& cfg, uint64_t seed);

struct RhConfig {
    size_t knn_k = 1;   // entropy estimator neighbors for order learning
    size_t jobs = 1;
    TrainConfig flow;
    OptConfig opt;
};

// End-to-end decision pipeline: learn an order from the data, fit one flow
// per node, compose the sampler, then solve for the decision. The order,
// flows, and sampler are built once and reused for every context.
class OlemRh {
public:
    OlemRh(const DataMatrix& data, AufTask task, const RhConfig& cfg,
           uint64_t seed);

    const Order& order() const { return stack_.order; }
    const FlowStack& stack() const { return stack_; }

    DecisionResult decide(const std::vector<double>& x, uint64_t seed) const;

private:
    AufTask task_;
    RhConfig cfg_;
    FlowStack stack_;
    std::optional<JointSampler> sampler_;
};

// One-shot convenience wrapper over OlemRh.
DecisionResult olem_rh(const DataMatrix& data, const AufTask& task,
                       const std::vector<double>& x, const RhConfig& cfg,
                       uint64_t seed);

}  // namespace auf
