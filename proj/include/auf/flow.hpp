#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auf/diff.hpp"
#include "auf/scm.hpp"

namespace auf {

struct TrainConfig {
    size_t blocks = 16;
    size_t width = 32;  // conditioner hidden width, two hidden layers
    double lr = 0.001;
    size_t batch = 256;
    double train_frac = 0.7;  // remainder is the validation split
    size_t patience = 20;     // epochs without validation improvement
    size_t max_epochs = 500;

    void validate() const;
};

// One monotone block: value <- s(cond) * value + t(cond), then a fixed
// smooth bijection (asinh on even block indices, sinh on odd ones, so the
// initial stack composes to the identity). s comes from a softplus with a
// 1e-4 floor, keeping the map strictly increasing in the noise. The
// conditioner is a two-hidden-layer tanh MLP with a zero output layer at
// init; with no conditioning inputs only the output bias b3 remains and is
// learned directly.
struct FlowBlock {
    Mat w1, b1, w2, b2, w3;
    Mat b3;  // 2 x 1: (raw scale, shift)
};

struct ConditionalFlow {
    size_t target = 0;
    size_t arity = 0;  // |predecessors| in the training order
    std::vector<FlowBlock> blocks;

    // Training metadata: per-epoch mean train NLL and validation NLL of the
    // attempt that produced the returned parameters.
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    size_t best_epoch = 0;
    double best_val = 0.0;
};

// Maximum-likelihood fit of the conditional density of `node` given its
// order predecessors, trained on the inverse pass (noise = T^{-1}(value))
// with early stopping on a held-out split. A non-finite loss triggers one
// reseeded restart; a second failure throws. Requires n >= 50.
ConditionalFlow fit_flow(const DataMatrix& data, const Order& order,
                         size_t node, const TrainConfig& cfg, uint64_t seed);

struct FlowStack {
    Order order;
    std::vector<ConditionalFlow> flows;  // indexed by node id
};

// Fits one flow per node (every node gets one; sampling bypasses the ones
// that are overwritten). Node fits are independent and seeded per node, so
// `jobs` changes wall time only.
FlowStack fit_stack(const DataMatrix& data, const Order& order,
                    const TrainConfig& cfg, uint64_t seed, size_t jobs = 1);

double flow_forward(const ConditionalFlow& f, double noise,
                    const std::vector<double>& cond);
double flow_inverse(const ConditionalFlow& f, double value,
                    const std::vector<double>& cond);

// Mean negative log-likelihood of `values` under the flow; cond is
// arity x n, one column per sample.
double flow_nll(const ConditionalFlow& f, const std::vector<double>& values,
                const Mat& cond);

// Taped forward map for a whole batch: noise and the conditioning rows are
// tape values (1 x n each), parameters enter as constants, so gradients
// flow to the noise and conditioning inputs only.
ad::Val flow_forward_taped(ad::Tape& tape, const ConditionalFlow& f,
                           ad::Val noise,
                           const std::vector<ad::Val>& cond_rows);

// One node of the composed sampler: value row from a noise row plus the
// emitted rows of the node's order predecessors.
struct NodeMap {
    size_t arity = 0;
    std::function<void(const double* noise, const Mat& cond, double* out,
                       size_t n)>
        eval;
    std::function<ad::Val(ad::Tape&, const Mat& noise_row,
                          const std::vector<ad::Val>& cond_rows)>
        eval_taped;
};

// Joint post-decision sampler: walks the order once, emitting the given
// context values, the decision values, and conditional draws for everything
// else. Built once; valid for any (x, z_a) afterwards.
class JointSampler {
public:
    JointSampler(Order order, std::vector<NodeMap> maps, const AufTask& task);

    size_t dim() const { return order_.size(); }
    const Order& order() const { return order_; }
    const std::vector<size_t>& outcomes() const { return outcomes_; }

    // noises is n x d (column = node). Returns n x d values.
    Mat sample(const Mat& noises, const std::vector<double>& x,
               const std::vector<double>& z_a) const;
    // Outcome columns only, n x |outcomes| (ascending node order).
    Mat sample_y(const Mat& noises, const std::vector<double>& x,
                 const std::vector<double>& z_a) const;
    // Taped outcome block, |outcomes| x n, differentiable w.r.t. z_a
    // (|A| x 1 tape input). Rows that cannot depend on the decision are
    // emitted as constants, so backward skips them.
    ad::Val sample_y_taped(ad::Tape& tape, const Mat& noises,
                           const std::vector<double>& x, ad::Val z_a) const;

private:
    Mat emit_rows(const Mat& noises, const std::vector<double>& x,
                  const std::vector<double>& z_a) const;  // d x n
    void check_args(const Mat& noises, const std::vector<double>& x,
                    size_t z_len) const;

    Order order_;
    std::vector<NodeMap> maps_;
    std::vector<Role> roles_;
    std::vector<size_t> ctx_index_, alt_index_;  // npos when inapplicable
    std::vector<size_t> outcomes_;
    std::vector<char> z_dep_;  // can the node's value depend on z_a
};

JointSampler build_joint_sampler(const FlowStack& stack, const AufTask& task);

// Exact-conditional sampler read off a linear structural model along a
// topological order: each node is affine in its parents plus its own noise
// mapped through the quantile transport of a standard normal input. Serves
// as the ground-truth reference the learned stack is compared against.
JointSampler exact_joint_sampler(const StructuralModel& m, const Order& order,
                                 const AufTask& task);

nlohmann::json stack_to_json(const FlowStack& stack);
FlowStack stack_from_json(const nlohmann::json& j);
void save_stack(const FlowStack& stack, const std::string& path);
FlowStack load_stack(const std::string& path);

}  // namespace auf
