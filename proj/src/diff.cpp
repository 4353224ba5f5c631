#include "auf/diff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "auf/kernels.hpp"

namespace auf::ad {

const Mat& Val::value() const { return tape->value_of(id); }
const Mat& Val::grad() const { return tape->grad_of(id); }

size_t Tape::push(Mat value, std::vector<size_t> parents,
                  std::function<void(Tape&, size_t)> back) {
    Node n;
    n.grad = Mat(value.rows(), value.cols());
    n.value = std::move(value);
    for (size_t p : parents) n.needs = n.needs || nodes_[p].needs;
    n.parents = std::move(parents);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

Val Tape::input(Mat v) {
    size_t id = push(std::move(v), {}, nullptr);
    nodes_[id].needs = true;
    return {this, id};
}

Val Tape::constant(Mat v) { return {this, push(std::move(v), {}, nullptr)}; }

void Tape::backward(const Val& out) {
    if (out.tape != this) throw std::invalid_argument("backward: foreign val");
    const Mat& v = nodes_[out.id].value;
    if (v.rows() != 1 || v.cols() != 1)
        throw std::invalid_argument("backward: output must be scalar");
    for (auto& n : nodes_) {
        auto& g = n.grad;
        std::fill(g.data(), g.data() + g.rows() * g.cols(), 0.0);
    }
    nodes_[out.id].grad(0, 0) = 1.0;
    // Creation order is topological, so one reverse sweep suffices. Nodes
    // reachable only from constants carry nothing to propagate.
    for (size_t id = out.id + 1; id-- > 0;) {
        if (nodes_[id].back && nodes_[id].needs) nodes_[id].back(*this, id);
    }
}

void Tape::clear() { nodes_.clear(); }

namespace {

void check_same_tape(const Val& a, const Val& b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw std::invalid_argument(std::string(op) + ": vals on different tapes");
}

void check_same_shape(const Val& a, const Val& b, const char* op) {
    check_same_tape(a, b, op);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

size_t numel(const Mat& m) { return m.rows() * m.cols(); }

// Elementwise binary op with per-entry partials.
template <typename Fwd, typename BackA, typename BackB>
Val binary(Val a, Val b, const char* name, Fwd fwd, BackA da, BackB db) {
    check_same_shape(a, b, name);
    const Mat& av = a.value();
    const Mat& bv = b.value();
    Mat out(av.rows(), av.cols());
    for (size_t t = 0; t < numel(out); ++t)
        out.data()[t] = fwd(av.data()[t], bv.data()[t]);
    const size_t ia = a.id, ib = b.id;
    auto back = [ia, ib, da, db](Tape& t, size_t self) {
        const Mat& g = t.grad_of(self);
        const Mat& x = t.value_of(ia);
        const Mat& y = t.value_of(ib);
        const size_t count = x.rows() * x.cols();
        if (t.needs_grad(ia)) {
            Mat& ga = t.grad_mut(ia);
            for (size_t k = 0; k < count; ++k)
                ga.data()[k] += g.data()[k] * da(x.data()[k], y.data()[k]);
        }
        if (t.needs_grad(ib)) {
            Mat& gb = t.grad_mut(ib);
            for (size_t k = 0; k < count; ++k)
                gb.data()[k] += g.data()[k] * db(x.data()[k], y.data()[k]);
        }
    };
    return {a.tape, a.tape->push(std::move(out), {ia, ib}, back)};
}

// Elementwise unary op; derivative receives (input, output).
template <typename Fwd, typename Back>
Val unary(Val a, Fwd fwd, Back dfn) {
    const Mat& av = a.value();
    Mat out(av.rows(), av.cols());
    for (size_t t = 0; t < numel(out); ++t) out.data()[t] = fwd(av.data()[t]);
    const size_t ia = a.id;
    auto back = [ia, dfn](Tape& t, size_t self) {
        if (!t.needs_grad(ia)) return;
        const Mat& g = t.grad_of(self);
        const Mat& x = t.value_of(ia);
        const Mat& y = t.value_of(self);
        Mat& ga = t.grad_mut(ia);
        for (size_t k = 0; k < x.rows() * x.cols(); ++k)
            ga.data()[k] += g.data()[k] * dfn(x.data()[k], y.data()[k]);
    };
    return {a.tape, a.tape->push(std::move(out), {ia}, back)};
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    // max(x,0) + log1p(e^{-|x|})
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

Val add(Val a, Val b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Val sub(Val a, Val b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Val mul(Val a, Val b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Val div(Val a, Val b) {
    const Mat& bv = b.value();
    for (size_t t = 0; t < bv.rows() * bv.cols(); ++t)
        if (bv.data()[t] == 0.0) throw std::domain_error("div: zero entry");
    return binary(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Val scale(Val a, double c) {
    return unary(
        a, [c](double x) { return c * x; },
        [c](double, double) { return c; });
}

Val add_const(Val a, double c) {
    return unary(
        a, [c](double x) { return x + c; },
        [](double, double) { return 1.0; });
}

Val neg(Val a) { return scale(a, -1.0); }

Val sigmoid(Val a) {
    return unary(a, stable_sigmoid,
                 [](double, double y) { return y * (1.0 - y); });
}

Val tanh_v(Val a) {
    return unary(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Val softplus(Val a) {
    return unary(a, stable_softplus,
                 [](double x, double) { return stable_sigmoid(x); });
}

Val exp_v(Val a) {
    return unary(
        a, [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Val log_v(Val a) {
    const Mat& av = a.value();
    for (size_t t = 0; t < av.rows() * av.cols(); ++t)
        if (!(av.data()[t] > 0.0))
            throw std::domain_error("log: nonpositive entry");
    return unary(
        a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Val abs_v(Val a) {
    return unary(
        a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x < 0.0 ? -1.0 : 1.0; });
}

Val sinh_v(Val a) {
    return unary(
        a, [](double x) { return std::sinh(x); },
        [](double x, double) { return std::cosh(x); });
}

Val asinh_v(Val a) {
    return unary(
        a, [](double x) { return std::asinh(x); },
        [](double x, double) { return 1.0 / std::sqrt(1.0 + x * x); });
}

Val matmul(Val a, Val b) {
    check_same_tape(a, b, "matmul");
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (av.cols() != bv.rows())
        throw std::invalid_argument("matmul: inner dimension mismatch");
    const size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Mat out(m, n);
    kern::ops().matmul_nn_acc(av.data(), bv.data(), out.data(), m, k, n);
    const size_t ia = a.id, ib = b.id;
    auto back = [ia, ib, m, k, n](Tape& t, size_t self) {
        const Mat& g = t.grad_of(self);
        const Mat& x = t.value_of(ia);
        const Mat& y = t.value_of(ib);
        // dA += G * B^T ; dB += A^T * G
        if (t.needs_grad(ia))
            kern::ops().matmul_nt_acc(g.data(), y.data(),
                                      t.grad_mut(ia).data(), m, n, k);
        if (t.needs_grad(ib))
            kern::ops().matmul_tn_acc(x.data(), g.data(),
                                      t.grad_mut(ib).data(), m, k, n);
    };
    return {a.tape, a.tape->push(std::move(out), {ia, ib}, back)};
}

Val affine(Val w, Val x, Val b) {
    check_same_tape(w, x, "affine");
    check_same_tape(w, b, "affine");
    const Mat& wv = w.value();
    const Mat& xv = x.value();
    const Mat& bv = b.value();
    if (wv.cols() != xv.rows() || bv.rows() != wv.rows() || bv.cols() != 1)
        throw std::invalid_argument("affine: shape mismatch");
    const size_t out_d = wv.rows(), in_d = wv.cols(), batch = xv.cols();
    Mat out(out_d, batch);
    kern::ops().matmul_nn_acc(wv.data(), xv.data(), out.data(), out_d, in_d,
                              batch);
    for (size_t i = 0; i < out_d; ++i)
        for (size_t j = 0; j < batch; ++j) out(i, j) += bv(i, 0);
    const size_t iw = w.id, ix = x.id, ib = b.id;
    auto back = [iw, ix, ib, out_d, in_d, batch](Tape& t, size_t self) {
        const Mat& g = t.grad_of(self);
        const Mat& wm = t.value_of(iw);
        const Mat& xm = t.value_of(ix);
        if (t.needs_grad(iw))
            kern::ops().matmul_nt_acc(g.data(), xm.data(),
                                      t.grad_mut(iw).data(), out_d, batch,
                                      in_d);
        if (t.needs_grad(ix))
            kern::ops().matmul_tn_acc(wm.data(), g.data(),
                                      t.grad_mut(ix).data(), out_d, in_d,
                                      batch);
        if (t.needs_grad(ib)) {
            Mat& gb = t.grad_mut(ib);
            for (size_t i = 0; i < out_d; ++i) {
                double s = 0.0;
                for (size_t j = 0; j < batch; ++j) s += g(i, j);
                gb(i, 0) += s;
            }
        }
    };
    return {w.tape, w.tape->push(std::move(out), {iw, ix, ib}, back)};
}

Val row(Val a, size_t r) {
    const Mat& av = a.value();
    if (r >= av.rows()) throw std::out_of_range("row: index");
    Mat out(1, av.cols());
    for (size_t j = 0; j < av.cols(); ++j) out(0, j) = av(r, j);
    const size_t ia = a.id;
    auto back = [ia, r](Tape& t, size_t self) {
        const Mat& g = t.grad_of(self);
        Mat& ga = t.grad_mut(ia);
        for (size_t j = 0; j < g.cols(); ++j) ga(r, j) += g(0, j);
    };
    return {a.tape, a.tape->push(std::move(out), {ia}, back)};
}

Val vcat(const std::vector<Val>& parts) {
    if (parts.empty()) throw std::invalid_argument("vcat: no parts");
    Tape* tape = parts[0].tape;
    size_t total_rows = 0;
    const size_t cols = parts[0].cols();
    std::vector<size_t> ids;
    for (const Val& p : parts) {
        check_same_tape(parts[0], p, "vcat");
        if (p.cols() != cols) throw std::invalid_argument("vcat: column mismatch");
        total_rows += p.rows();
        ids.push_back(p.id);
    }
    Mat out(total_rows, cols);
    size_t at = 0;
    for (const Val& p : parts) {
        const Mat& pv = p.value();
        std::copy(pv.data(), pv.data() + numel(pv), out.data() + at);
        at += numel(pv);
    }
    auto back = [ids](Tape& t, size_t self) {
        const Mat& g = t.grad_of(self);
        size_t at = 0;
        for (size_t id : ids) {
            Mat& gp = t.grad_mut(id);
            const size_t count = gp.rows() * gp.cols();
            if (t.needs_grad(id))
                for (size_t k = 0; k < count; ++k)
                    gp.data()[k] += g.data()[at + k];
            at += count;
        }
    };
    return {tape, tape->push(std::move(out), std::move(ids), back)};
}

Val sum(Val a) {
    const Mat& av = a.value();
    Mat out(1, 1);
    out(0, 0) = kern::ops().reduce_sum(av.data(), numel(av));
    const size_t ia = a.id;
    auto back = [ia](Tape& t, size_t self) {
        const double g = t.grad_of(self)(0, 0);
        Mat& ga = t.grad_mut(ia);
        for (size_t k = 0; k < ga.rows() * ga.cols(); ++k) ga.data()[k] += g;
    };
    return {a.tape, a.tape->push(std::move(out), {ia}, back)};
}

Val mean(Val a) {
    const size_t n = numel(a.value());
    if (n == 0) throw std::invalid_argument("mean: empty");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Adam::Adam(std::vector<size_t> block_sizes, double lr, double beta1,
           double beta2, double eps)
    : sizes_(std::move(block_sizes)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
    size_t total = 0;
    for (size_t s : sizes_) {
        offsets_.push_back(total);
        total += s;
    }
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
}

void Adam::step(const std::vector<double*>& params,
                const std::vector<const double*>& grads) {
    if (params.size() != sizes_.size() || grads.size() != sizes_.size())
        throw std::invalid_argument("adam: block count mismatch");
    for (size_t b = 0; b < sizes_.size(); ++b)
        for (size_t k = 0; k < sizes_[b]; ++k)
            if (!std::isfinite(grads[b][k]))
                throw std::runtime_error("adam: non-finite gradient");
    ++t_;
    const double inv_corr1 =
        1.0 / (1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const double inv_corr2 =
        1.0 / (1.0 - std::pow(beta2_, static_cast<double>(t_)));
    for (size_t b = 0; b < sizes_.size(); ++b)
        kern::ops().adam_update(params[b], m_.data() + offsets_[b],
                                v_.data() + offsets_[b], grads[b], sizes_[b],
                                lr_, beta1_, beta2_, eps_, inv_corr1,
                                inv_corr2);
}

}  // namespace auf::ad
