#pragma once

#include <functional>
#include <vector>

#include "auf/dense.hpp"

namespace auf::ad {

class Tape;

// Handle to one tape node. Valid only while its tape is alive and unclear()ed.
struct Val {
    Tape* tape = nullptr;
    size_t id = 0;

    const Mat& value() const;
    const Mat& grad() const;
    size_t rows() const { return value().rows(); }
    size_t cols() const { return value().cols(); }
};

// Define-by-run reverse-mode tape over dense matrices. Nodes are created in
// topological order by construction, so the reverse pass is a single
// backwards sweep. One tape is single-threaded; use one tape per thread.
class Tape {
public:
    // Leaf node; its gradient is available after backward().
    Val input(Mat v);

    // Leaf node excluded from gradient propagation. Subgraphs that depend
    // only on constants are skipped entirely by backward(), which keeps
    // repeated evaluations with frozen parameters cheap.
    Val constant(Mat v);

    // Runs reverse-mode accumulation from a scalar (1x1) output.
    void backward(const Val& out);

    size_t size() const { return nodes_.size(); }
    // Drops all nodes; outstanding Vals become invalid.
    void clear();

    // Internals used by the op builders.
    size_t push(Mat value, std::vector<size_t> parents,
                std::function<void(Tape&, size_t)> back);
    const Mat& value_of(size_t id) const { return nodes_[id].value; }
    const Mat& grad_of(size_t id) const { return nodes_[id].grad; }
    Mat& grad_mut(size_t id) { return nodes_[id].grad; }
    bool needs_grad(size_t id) const { return nodes_[id].needs; }
    const std::vector<size_t>& parents_of(size_t id) const {
        return nodes_[id].parents;
    }

private:
    struct Node {
        Mat value;
        Mat grad;
        std::vector<size_t> parents;
        std::function<void(Tape&, size_t)> back;
        bool needs = false;
    };
    std::vector<Node> nodes_;
};

// Elementwise; shapes must match exactly.
Val add(Val a, Val b);
Val sub(Val a, Val b);
Val mul(Val a, Val b);
// Denominator entries must be nonzero.
Val div(Val a, Val b);

// Elementwise against a compile-time constant.
Val scale(Val a, double c);
Val add_const(Val a, double c);

Val neg(Val a);
Val sigmoid(Val a);
Val tanh_v(Val a);
// Numerically stable log(1 + e^x); derivative sigmoid(x).
Val softplus(Val a);
Val exp_v(Val a);
// Requires strictly positive entries.
Val log_v(Val a);
Val abs_v(Val a);
Val sinh_v(Val a);
Val asinh_v(Val a);

// (m x k) * (k x n).
Val matmul(Val a, Val b);
// w (out x in) * x (in x batch) + b (out x 1) broadcast across columns.
Val affine(Val w, Val x, Val b);

// Single row r as a 1 x cols node.
Val row(Val a, size_t r);

// Stacks parts vertically; all parts must share a column count.
Val vcat(const std::vector<Val>& parts);

// Reductions to 1x1.
Val sum(Val a);
Val mean(Val a);

// One Adam optimizer over a fixed set of parameter blocks. step() applies a
// bias-corrected update to every block; a non-finite gradient aborts the
// step before any parameter is touched.
class Adam {
public:
    Adam(std::vector<size_t> block_sizes, double lr,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<double*>& params,
              const std::vector<const double*>& grads);
    size_t steps_taken() const { return t_; }
    double lr() const { return lr_; }

private:
    std::vector<size_t> sizes_;
    std::vector<size_t> offsets_;
    std::vector<double> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    size_t t_ = 0;
};

}  // namespace auf::ad
