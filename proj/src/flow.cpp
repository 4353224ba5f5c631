#include "auf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "auf/kernels.hpp"
#include "auf/parallel.hpp"
#include "auf/rng.hpp"

namespace auf {
namespace {

constexpr double k_scale_floor = 1e-4;
constexpr double k_half_log_2pi = 0.91893853320467274178;
// softplus(x) = 1 at x = ln(e-1); combined with the zero output layer this
// starts every block at the identity map.
constexpr double k_unit_scale_raw = 0.5413248546129181;

constexpr size_t k_npos = static_cast<size_t>(-1);

double softplus_s(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// ln cosh(x) without overflow for large |x|.
double log_cosh_s(double x) {
    const double a = std::fabs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double std_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

bool even_block(size_t k) { return k % 2 == 0; }

// (s_raw, t) rows of one block's conditioner over a batch; cond is
// arity x n. An arity-0 block is just its output bias.
void conditioner_batch(const FlowBlock& blk, const Mat& cond, size_t n,
                       std::vector<double>& s_raw, std::vector<double>& t) {
    s_raw.assign(n, 0.0);
    t.assign(n, 0.0);
    if (blk.w1.rows() == 0) {
        std::fill(s_raw.begin(), s_raw.end(), blk.b3(0, 0));
        std::fill(t.begin(), t.end(), blk.b3(1, 0));
        return;
    }
    const size_t width = blk.w1.rows();
    if (cond.rows() != blk.w1.cols() || cond.cols() != n)
        throw std::invalid_argument("flow: conditioning shape mismatch");
    Mat h1(width, n);
    kern::ops().matmul_nn_acc(blk.w1.data(), cond.data(), h1.data(), width,
                              blk.w1.cols(), n);
    for (size_t i = 0; i < width; ++i)
        for (size_t j = 0; j < n; ++j) h1(i, j) = std::tanh(h1(i, j) + blk.b1(i, 0));
    Mat h2(width, n);
    kern::ops().matmul_nn_acc(blk.w2.data(), h1.data(), h2.data(), width,
                              width, n);
    for (size_t i = 0; i < width; ++i)
        for (size_t j = 0; j < n; ++j) h2(i, j) = std::tanh(h2(i, j) + blk.b2(i, 0));
    Mat o(2, n);
    kern::ops().matmul_nn_acc(blk.w3.data(), h2.data(), o.data(), 2, width, n);
    for (size_t j = 0; j < n; ++j) {
        s_raw[j] = o(0, j) + blk.b3(0, 0);
        t[j] = o(1, j) + blk.b3(1, 0);
    }
}

// noise -> value over a batch, in place.
void forward_batch(const ConditionalFlow& f, const Mat& cond,
                   std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<double> s_raw, t;
    for (size_t k = 0; k < f.blocks.size(); ++k) {
        conditioner_batch(f.blocks[k], cond, n, s_raw, t);
        for (size_t j = 0; j < n; ++j) {
            const double s = softplus_s(s_raw[j]) + k_scale_floor;
            const double u = s * v[j] + t[j];
            v[j] = even_block(k) ? std::asinh(u) : std::sinh(u);
        }
    }
}

// value -> noise over a batch, in place, accumulating the log-determinant
// of the inverse map into `logdet` when given.
void inverse_batch(const ConditionalFlow& f, const Mat& cond,
                   std::vector<double>& v, std::vector<double>* logdet) {
    const size_t n = v.size();
    if (logdet) logdet->assign(n, 0.0);
    std::vector<double> s_raw, t;
    for (size_t k = f.blocks.size(); k-- > 0;) {
        conditioner_batch(f.blocks[k], cond, n, s_raw, t);
        for (size_t j = 0; j < n; ++j) {
            const double w = v[j];
            double u;
            if (even_block(k)) {
                u = std::sinh(w);
                if (logdet) (*logdet)[j] += log_cosh_s(w);
            } else {
                u = std::asinh(w);
                if (logdet) (*logdet)[j] -= 0.5 * std::log1p(w * w);
            }
            const double s = softplus_s(s_raw[j]) + k_scale_floor;
            v[j] = (u - t[j]) / s;
            if (logdet) (*logdet)[j] -= std::log(s);
        }
    }
}

ConditionalFlow init_flow(size_t target, size_t arity, const TrainConfig& cfg,
                          Rng& rng) {
    ConditionalFlow f;
    f.target = target;
    f.arity = arity;
    f.blocks.resize(cfg.blocks);
    for (FlowBlock& b : f.blocks) {
        b.b3 = Mat(2, 1);
        b.b3(0, 0) = k_unit_scale_raw;
        b.b3(1, 0) = 0.0;
        if (arity == 0) continue;
        const size_t w = cfg.width;
        b.w1 = Mat(w, arity);
        const double sd1 = 1.0 / std::sqrt(static_cast<double>(arity));
        for (size_t t = 0; t < w * arity; ++t) b.w1.data()[t] = sd1 * rng.normal();
        b.b1 = Mat(w, 1);
        b.w2 = Mat(w, w);
        const double sd2 = 1.0 / std::sqrt(static_cast<double>(w));
        for (size_t t = 0; t < w * w; ++t) b.w2.data()[t] = sd2 * rng.normal();
        b.b2 = Mat(w, 1);
        b.w3 = Mat(2, w);  // zero: the stack starts as the identity
    }
    return f;
}

// Tape handles for one block's parameters.
struct BlockVals {
    ad::Val w1, b1, w2, b2, w3, b3;
};

// Builds the batch NLL of `values` given `cond` on the inverse pass.
// Parameters enter as the given tape nodes; data enters as constants.
ad::Val nll_graph(ad::Tape& tape, const std::vector<BlockVals>& ps,
                  bool has_cond, ad::Val values, ad::Val cond) {
    using namespace ad;
    const size_t n = values.cols();
    Val ones = tape.constant(Mat(1, n, 1.0));
    Val v = values;
    std::optional<Val> acc;
    for (size_t k = ps.size(); k-- > 0;) {
        const BlockVals& p = ps[k];
        Val o = has_cond
                    ? affine(p.w3,
                             tanh_v(affine(p.w2, tanh_v(affine(p.w1, cond, p.b1)),
                                           p.b2)),
                             p.b3)
                    : matmul(p.b3, ones);
        Val s = add_const(softplus(row(o, 0)), k_scale_floor);
        Val t = row(o, 1);
        Val u, term;
        if (even_block(k)) {
            u = sinh_v(v);
            Val a = abs_v(v);
            term = add_const(add(a, softplus(scale(a, -2.0))),
                             -std::numbers::ln2);
        } else {
            u = asinh_v(v);
            term = scale(log_v(add_const(mul(v, v), 1.0)), -0.5);
        }
        v = div(sub(u, t), s);
        Val ld = sub(term, log_v(s));
        acc = acc ? add(*acc, ld) : ld;
    }
    Val nll_row = sub(add_const(scale(mul(v, v), 0.5), k_half_log_2pi), *acc);
    return mean(nll_row);
}

std::vector<Mat*> param_mats(ConditionalFlow& f) {
    std::vector<Mat*> out;
    for (FlowBlock& b : f.blocks) {
        if (f.arity > 0) {
            out.push_back(&b.w1);
            out.push_back(&b.b1);
            out.push_back(&b.w2);
            out.push_back(&b.b2);
            out.push_back(&b.w3);
        }
        out.push_back(&b.b3);
    }
    return out;
}

// One full training attempt. Returns false on a non-finite loss or
// gradient, leaving the flow in an unspecified state.
bool fit_attempt(const std::vector<double>& values, const Mat& cond,
                 const TrainConfig& cfg, uint64_t seed, ConditionalFlow& f) {
    const size_t n = values.size();
    const size_t arity = f.arity;
    const size_t n_train =
        static_cast<size_t>(static_cast<double>(n) * cfg.train_frac);

    Rng split_rng = stream(seed, "flow-split");
    std::vector<size_t> idx = split_rng.permutation(n);
    std::vector<size_t> train_idx(idx.begin(), idx.begin() + n_train);
    std::vector<size_t> val_idx(idx.begin() + n_train, idx.end());

    const size_t n_val = val_idx.size();
    std::vector<double> val_values(n_val);
    Mat val_cond(arity, n_val);
    for (size_t j = 0; j < n_val; ++j) {
        val_values[j] = values[val_idx[j]];
        for (size_t k = 0; k < arity; ++k) val_cond(k, j) = cond(k, val_idx[j]);
    }

    Rng rng = stream(seed, "flow-train");
    f = init_flow(f.target, arity, cfg, rng);

    std::vector<Mat*> mats = param_mats(f);
    std::vector<size_t> sizes;
    std::vector<double*> params;
    for (Mat* m : mats) {
        sizes.push_back(m->rows() * m->cols());
        params.push_back(m->data());
    }
    ad::Adam adam(sizes, cfg.lr);

    std::vector<FlowBlock> best = f.blocks;
    double best_val = std::numeric_limits<double>::infinity();
    size_t best_epoch = 0;
    size_t stale = 0;

    for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < n_train; start += cfg.batch) {
            const size_t b = std::min(cfg.batch, n_train - start);
            Mat vb(1, b);
            Mat cb(arity, b);
            for (size_t j = 0; j < b; ++j) {
                const size_t r = train_idx[start + j];
                vb(0, j) = values[r];
                for (size_t k = 0; k < arity; ++k) cb(k, j) = cond(k, r);
            }
            ad::Tape tape;
            std::vector<BlockVals> ps(f.blocks.size());
            std::vector<size_t> ids;
            for (size_t k = 0; k < f.blocks.size(); ++k) {
                FlowBlock& blk = f.blocks[k];
                if (arity > 0) {
                    ps[k].w1 = tape.input(blk.w1);
                    ps[k].b1 = tape.input(blk.b1);
                    ps[k].w2 = tape.input(blk.w2);
                    ps[k].b2 = tape.input(blk.b2);
                    ps[k].w3 = tape.input(blk.w3);
                    ids.insert(ids.end(), {ps[k].w1.id, ps[k].b1.id, ps[k].w2.id,
                                           ps[k].b2.id, ps[k].w3.id});
                }
                ps[k].b3 = tape.input(blk.b3);
                ids.push_back(ps[k].b3.id);
            }
            ad::Val loss = nll_graph(tape, ps, arity > 0,
                                     tape.constant(std::move(vb)),
                                     tape.constant(std::move(cb)));
            const double lv = loss.value()(0, 0);
            if (!std::isfinite(lv)) return false;
            epoch_loss += lv * static_cast<double>(b);
            tape.backward(loss);
            std::vector<const double*> grads;
            for (size_t id : ids) grads.push_back(tape.grad_of(id).data());
            try {
                adam.step(params, grads);
            } catch (const std::runtime_error&) {
                return false;
            }
        }
        f.train_curve.push_back(epoch_loss / static_cast<double>(n_train));

        const double vn = flow_nll(f, val_values, val_cond);
        f.val_curve.push_back(vn);
        if (!std::isfinite(vn)) return false;
        if (vn < best_val) {
            best_val = vn;
            best = f.blocks;
            best_epoch = epoch;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    f.blocks = std::move(best);
    f.best_val = best_val;
    f.best_epoch = best_epoch;
    return true;
}

}  // namespace

void TrainConfig::validate() const {
    if (blocks == 0 || width == 0 || batch == 0 || max_epochs == 0)
        throw std::invalid_argument("train config: zero size");
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr");
    if (!(train_frac > 0.0) || !(train_frac < 1.0))
        throw std::invalid_argument("train config: split fraction");
}

ConditionalFlow fit_flow(const DataMatrix& data, const Order& order,
                         size_t node, const TrainConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (node >= order.size() || order.size() != data.d)
        throw std::invalid_argument("fit_flow: node outside order");
    if (data.n < 50)
        throw std::invalid_argument("fit_flow: needs at least 50 samples");

    const std::vector<size_t> preds = order.predecessors(node);
    const size_t arity = preds.size();
    std::vector<double> values = data.column(node);
    Mat cond(arity, data.n);
    for (size_t k = 0; k < arity; ++k)
        for (size_t j = 0; j < data.n; ++j) cond(k, j) = data.at(j, preds[k]);

    ConditionalFlow f;
    f.target = node;
    f.arity = arity;
    for (uint64_t attempt = 0; attempt < 2; ++attempt) {
        f.train_curve.clear();
        f.val_curve.clear();
        if (fit_attempt(values, cond, cfg, mix_seed(seed, attempt), f))
            return f;
    }
    throw std::runtime_error("fit_flow: training diverged twice");
}

FlowStack fit_stack(const DataMatrix& data, const Order& order,
                    const TrainConfig& cfg, uint64_t seed, size_t jobs) {
    FlowStack stack;
    stack.order = order;
    stack.flows.resize(order.size());
    parallel_for(order.size(), jobs, [&](size_t i) {
        stack.flows[i] =
            fit_flow(data, order, i, cfg, mix_seed(seed, hash_tag("fit-node"), i));
    });
    return stack;
}

double flow_forward(const ConditionalFlow& f, double noise,
                    const std::vector<double>& cond) {
    if (cond.size() != f.arity)
        throw std::invalid_argument("flow_forward: conditioning arity");
    Mat c(f.arity, 1);
    for (size_t k = 0; k < f.arity; ++k) c(k, 0) = cond[k];
    std::vector<double> v = {noise};
    forward_batch(f, c, v);
    return v[0];
}

double flow_inverse(const ConditionalFlow& f, double value,
                    const std::vector<double>& cond) {
    if (cond.size() != f.arity)
        throw std::invalid_argument("flow_inverse: conditioning arity");
    Mat c(f.arity, 1);
    for (size_t k = 0; k < f.arity; ++k) c(k, 0) = cond[k];
    std::vector<double> v = {value};
    inverse_batch(f, c, v, nullptr);
    return v[0];
}

double flow_nll(const ConditionalFlow& f, const std::vector<double>& values,
                const Mat& cond) {
    if (values.empty()) throw std::invalid_argument("flow_nll: no samples");
    if (cond.rows() != f.arity || cond.cols() != values.size())
        throw std::invalid_argument("flow_nll: conditioning shape");
    std::vector<double> v = values;
    std::vector<double> logdet;
    inverse_batch(f, cond, v, &logdet);
    double acc = 0.0;
    for (size_t j = 0; j < v.size(); ++j)
        acc += k_half_log_2pi + 0.5 * v[j] * v[j] - logdet[j];
    return acc / static_cast<double>(v.size());
}

ad::Val flow_forward_taped(ad::Tape& tape, const ConditionalFlow& f,
                           ad::Val noise,
                           const std::vector<ad::Val>& cond_rows) {
    using namespace ad;
    if (cond_rows.size() != f.arity)
        throw std::invalid_argument("flow_forward_taped: conditioning arity");
    if (noise.rows() != 1)
        throw std::invalid_argument("flow_forward_taped: noise must be a row");
    const size_t n = noise.cols();
    std::optional<Val> cond;
    if (f.arity > 0) cond = vcat(cond_rows);
    Val ones = tape.constant(Mat(1, n, 1.0));
    Val v = noise;
    for (size_t k = 0; k < f.blocks.size(); ++k) {
        const FlowBlock& blk = f.blocks[k];
        Val o = f.arity > 0
                    ? affine(tape.constant(blk.w3),
                             tanh_v(affine(tape.constant(blk.w2),
                                           tanh_v(affine(tape.constant(blk.w1),
                                                         *cond,
                                                         tape.constant(blk.b1))),
                                           tape.constant(blk.b2))),
                             tape.constant(blk.b3))
                    : matmul(tape.constant(blk.b3), ones);
        Val s = add_const(softplus(row(o, 0)), k_scale_floor);
        Val u = add(mul(s, v), row(o, 1));
        v = even_block(k) ? asinh_v(u) : sinh_v(u);
    }
    return v;
}

JointSampler::JointSampler(Order order, std::vector<NodeMap> maps,
                           const AufTask& task)
    : order_(std::move(order)),
      maps_(std::move(maps)),
      roles_(task.roles),
      ctx_index_(roles_.size(), k_npos),
      alt_index_(roles_.size(), k_npos),
      outcomes_(task.outcome_nodes()),
      z_dep_(roles_.size(), 0) {
    const size_t d = order_.size();
    if (maps_.size() != d || roles_.size() != d)
        throw std::invalid_argument("joint sampler: size mismatch");
    const std::vector<size_t> ctx = task.context_nodes();
    for (size_t q = 0; q < ctx.size(); ++q) ctx_index_[ctx[q]] = q;
    for (size_t q = 0; q < task.alterable.size(); ++q)
        alt_index_[task.alterable[q]] = q;
    bool seen_dep = false;
    for (size_t pos = 0; pos < d; ++pos) {
        const size_t node = order_.perm[pos];
        if (alt_index_[node] != k_npos) {
            z_dep_[node] = 1;
            seen_dep = true;
            continue;
        }
        if (roles_[node] == Role::context) continue;
        if (maps_[node].arity != pos)
            throw std::invalid_argument(
                "joint sampler: map arity inconsistent with order position");
        z_dep_[node] = seen_dep ? 1 : 0;
    }
}

void JointSampler::check_args(const Mat& noises, const std::vector<double>& x,
                              size_t z_len) const {
    size_t n_ctx = 0, n_alt = 0;
    for (size_t i = 0; i < roles_.size(); ++i) {
        if (ctx_index_[i] != k_npos) ++n_ctx;
        if (alt_index_[i] != k_npos) ++n_alt;
    }
    if (noises.cols() != order_.size() || noises.rows() == 0)
        throw std::invalid_argument("joint sampler: noise must be n x d");
    if (x.size() != n_ctx || z_len != n_alt)
        throw std::invalid_argument("joint sampler: x or z_a arity");
}

Mat JointSampler::emit_rows(const Mat& noises, const std::vector<double>& x,
                            const std::vector<double>& z_a) const {
    const size_t d = order_.size();
    const size_t n = noises.rows();
    Mat e(d, n);
    std::vector<double> nb(n);
    for (size_t pos = 0; pos < d; ++pos) {
        const size_t node = order_.perm[pos];
        double* out = e.data() + node * n;
        if (ctx_index_[node] != k_npos) {
            std::fill(out, out + n, x[ctx_index_[node]]);
            continue;
        }
        if (alt_index_[node] != k_npos) {
            std::fill(out, out + n, z_a[alt_index_[node]]);
            continue;
        }
        Mat cond(pos, n);
        for (size_t k = 0; k < pos; ++k) {
            const double* src = e.data() + order_.perm[k] * n;
            std::copy(src, src + n, cond.data() + k * n);
        }
        for (size_t s = 0; s < n; ++s) nb[s] = noises(s, node);
        maps_[node].eval(nb.data(), cond, out, n);
    }
    return e;
}

Mat JointSampler::sample(const Mat& noises, const std::vector<double>& x,
                         const std::vector<double>& z_a) const {
    check_args(noises, x, z_a.size());
    const Mat e = emit_rows(noises, x, z_a);
    const size_t n = noises.rows(), d = order_.size();
    Mat out(n, d);
    for (size_t s = 0; s < n; ++s)
        for (size_t i = 0; i < d; ++i) out(s, i) = e(i, s);
    return out;
}

Mat JointSampler::sample_y(const Mat& noises, const std::vector<double>& x,
                           const std::vector<double>& z_a) const {
    check_args(noises, x, z_a.size());
    const Mat e = emit_rows(noises, x, z_a);
    const size_t n = noises.rows();
    Mat out(n, outcomes_.size());
    for (size_t s = 0; s < n; ++s)
        for (size_t q = 0; q < outcomes_.size(); ++q)
            out(s, q) = e(outcomes_[q], s);
    return out;
}

ad::Val JointSampler::sample_y_taped(ad::Tape& tape, const Mat& noises,
                                     const std::vector<double>& x,
                                     ad::Val z_a) const {
    using namespace ad;
    check_args(noises, x, z_a.value().rows());
    if (z_a.cols() != 1)
        throw std::invalid_argument("joint sampler: z_a must be a column");
    const size_t d = order_.size();
    const size_t n = noises.rows();

    // Decision-independent rows are computed off tape and wrapped lazily.
    Mat fixed(d, n);
    std::vector<std::optional<Val>> rows(d);
    std::vector<double> nb(n);
    Val ones = tape.constant(Mat(1, n, 1.0));
    auto fixed_as_val = [&](size_t node) -> Val {
        if (!rows[node]) {
            Mat r(1, n);
            std::copy(fixed.data() + node * n, fixed.data() + (node + 1) * n,
                      r.data());
            rows[node] = tape.constant(std::move(r));
        }
        return *rows[node];
    };

    for (size_t pos = 0; pos < d; ++pos) {
        const size_t node = order_.perm[pos];
        if (ctx_index_[node] != k_npos) {
            std::fill(fixed.data() + node * n, fixed.data() + (node + 1) * n,
                      x[ctx_index_[node]]);
            continue;
        }
        if (alt_index_[node] != k_npos) {
            rows[node] = matmul(row(z_a, alt_index_[node]), ones);
            continue;
        }
        if (!z_dep_[node]) {
            Mat cond(pos, n);
            for (size_t k = 0; k < pos; ++k) {
                const double* src = fixed.data() + order_.perm[k] * n;
                std::copy(src, src + n, cond.data() + k * n);
            }
            for (size_t s = 0; s < n; ++s) nb[s] = noises(s, node);
            maps_[node].eval(nb.data(), cond, fixed.data() + node * n, n);
            continue;
        }
        std::vector<Val> cond_rows;
        cond_rows.reserve(pos);
        for (size_t k = 0; k < pos; ++k) {
            const size_t pred = order_.perm[k];
            cond_rows.push_back(rows[pred] ? *rows[pred] : fixed_as_val(pred));
        }
        Mat noise_row(1, n);
        for (size_t s = 0; s < n; ++s) noise_row(0, s) = noises(s, node);
        rows[node] = maps_[node].eval_taped(tape, noise_row, cond_rows);
    }

    std::vector<Val> y_rows;
    for (size_t q : outcomes_)
        y_rows.push_back(rows[q] ? *rows[q] : fixed_as_val(q));
    return vcat(y_rows);
}

JointSampler build_joint_sampler(const FlowStack& stack, const AufTask& task) {
    const size_t d = stack.order.size();
    if (stack.flows.size() != d)
        throw std::invalid_argument("build_joint_sampler: stack incomplete");
    std::vector<NodeMap> maps(d);
    for (size_t i = 0; i < d; ++i) {
        const ConditionalFlow flow = stack.flows[i];  // owned by the closures
        maps[i].arity = flow.arity;
        maps[i].eval = [flow](const double* noise, const Mat& cond, double* out,
                              size_t n) {
            std::vector<double> v(noise, noise + n);
            forward_batch(flow, cond, v);
            std::copy(v.begin(), v.end(), out);
        };
        maps[i].eval_taped = [flow](ad::Tape& tape, const Mat& noise_row,
                                    const std::vector<ad::Val>& cond_rows) {
            return flow_forward_taped(tape, flow, tape.constant(noise_row),
                                      cond_rows);
        };
    }
    return JointSampler(stack.order, std::move(maps), task);
}

JointSampler exact_joint_sampler(const StructuralModel& m, const Order& order,
                                 const AufTask& task) {
    const size_t d = m.dim();
    if (order.size() != d)
        throw std::invalid_argument("exact sampler: order size");
    for (const auto& [from, to] : m.graph.edges())
        if (order.inverse[from] >= order.inverse[to])
            throw std::invalid_argument(
                "exact sampler: order not topological for the model");

    std::vector<NodeMap> maps(d);
    for (size_t i = 0; i < d; ++i) {
        const size_t pos = order.inverse[i];
        const StructuralFn& fn = m.functions[i];
        std::vector<double> coef(pos, 0.0);
        if (const auto* lin = std::get_if<LinearFn>(&fn.impl)) {
            for (size_t p = 0; p < fn.parents.size(); ++p) {
                const size_t at = order.inverse[fn.parents[p]];
                coef[at] = lin->weights[p];
            }
        } else if (!std::holds_alternative<std::monostate>(fn.impl)) {
            throw std::invalid_argument(
                "exact sampler: needs linear structural functions");
        }
        const NoiseSpec spec = m.noises[i];
        auto noise_term = [spec](double z) {
            if (spec.family == NoiseFamily::gaussian) return spec.a * z;
            const double u =
                std::clamp(std_normal_cdf(z), 1e-15, 1.0 - 1e-15);
            return spec.quantile(u);
        };
        maps[i].arity = pos;
        maps[i].eval = [coef, noise_term](const double* noise, const Mat& cond,
                                          double* out, size_t n) {
            for (size_t s = 0; s < n; ++s) {
                double acc = noise_term(noise[s]);
                for (size_t k = 0; k < coef.size(); ++k)
                    acc += coef[k] * cond(k, s);
                out[s] = acc;
            }
        };
        maps[i].eval_taped = [coef, noise_term](
                                 ad::Tape& tape, const Mat& noise_row,
                                 const std::vector<ad::Val>& cond_rows) {
            using namespace ad;
            const size_t n = noise_row.cols();
            Mat eps(1, n);
            for (size_t s = 0; s < n; ++s) eps(0, s) = noise_term(noise_row(0, s));
            Val e = tape.constant(std::move(eps));
            if (coef.empty()) return e;
            Mat c(1, coef.size());
            std::copy(coef.begin(), coef.end(), c.data());
            return add(matmul(tape.constant(std::move(c)), vcat(cond_rows)), e);
        };
    }
    return JointSampler(order, std::move(maps), task);
}

namespace {

nlohmann::json block_to_json(const FlowBlock& b) {
    return {{"w1", mat_to_json(b.w1)}, {"b1", mat_to_json(b.b1)},
            {"w2", mat_to_json(b.w2)}, {"b2", mat_to_json(b.b2)},
            {"w3", mat_to_json(b.w3)}, {"b3", mat_to_json(b.b3)}};
}

FlowBlock block_from_json(const nlohmann::json& j) {
    FlowBlock b;
    b.w1 = mat_from_json(j.at("w1"));
    b.b1 = mat_from_json(j.at("b1"));
    b.w2 = mat_from_json(j.at("w2"));
    b.b2 = mat_from_json(j.at("b2"));
    b.w3 = mat_from_json(j.at("w3"));
    b.b3 = mat_from_json(j.at("b3"));
    return b;
}

}  // namespace

nlohmann::json stack_to_json(const FlowStack& stack) {
    nlohmann::json flows = nlohmann::json::array();
    for (const ConditionalFlow& f : stack.flows) {
        nlohmann::json blocks = nlohmann::json::array();
        for (const FlowBlock& b : f.blocks) blocks.push_back(block_to_json(b));
        flows.push_back({{"target", f.target},
                         {"arity", f.arity},
                         {"blocks", std::move(blocks)},
                         {"train_curve", f.train_curve},
                         {"val_curve", f.val_curve},
                         {"best_epoch", f.best_epoch},
                         {"best_val", f.best_val}});
    }
    return {{"version", "flowstack/1"},
            {"order", order_to_json(stack.order)},
            {"flows", std::move(flows)}};
}

FlowStack stack_from_json(const nlohmann::json& j) {
    if (j.at("version").get<std::string>() != "flowstack/1")
        throw std::runtime_error("flow stack: unknown version tag");
    FlowStack stack;
    stack.order = order_from_json(j.at("order"));
    for (const auto& jf : j.at("flows")) {
        ConditionalFlow f;
        f.target = jf.at("target").get<size_t>();
        f.arity = jf.at("arity").get<size_t>();
        for (const auto& jb : jf.at("blocks"))
            f.blocks.push_back(block_from_json(jb));
        f.train_curve = jf.at("train_curve").get<std::vector<double>>();
        f.val_curve = jf.at("val_curve").get<std::vector<double>>();
        f.best_epoch = jf.at("best_epoch").get<size_t>();
        f.best_val = jf.at("best_val").get<double>();
        stack.flows.push_back(std::move(f));
    }
    return stack;
}

void save_stack(const FlowStack& stack, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_stack: cannot open " + path);
    out << stack_to_json(stack).dump(2) << "\n";
}

FlowStack load_stack(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_stack: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return stack_from_json(j);
}

}  // namespace auf
