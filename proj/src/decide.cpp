#include "auf/decide.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include "auf/diff.hpp"
#include "auf/rng.hpp"

namespace auf {

namespace {

constexpr double k_lp_tol = 1e-9;
constexpr double k_feas_tol = 1e-7;
constexpr size_t k_npos = static_cast<size_t>(-1);

Mat normal_mat(size_t rows, size_t cols, Rng& rng) {
    Mat m(rows, cols);
    double* p = m.data();
    for (size_t i = 0; i < rows * cols; ++i) p[i] = rng.normal();
    return m;
}

// Dense simplex tableau over [real vars | slacks | artificials] with the
// rhs kept nonnegative. Bland's rule (lowest eligible index both for the
// entering column and for ratio-test ties) rules out cycling, which matters
// more than speed at these sizes.
struct Tableau {
    size_t m = 0;
    size_t n = 0;
    std::vector<double> a;        // m x n
    std::vector<double> rhs;      // m
    std::vector<double> red;      // reduced cost row
    double red_rhs = 0.0;         // objective = -red_rhs
    std::vector<size_t> basis;    // column basic in each row
    std::vector<char> allowed;    // columns eligible to enter

    Tableau(size_t rows, size_t cols)
        : m(rows),
          n(cols),
          a(rows * cols, 0.0),
          rhs(rows, 0.0),
          red(cols, 0.0),
          basis(rows, k_npos),
          allowed(cols, 1) {}

    double& at(size_t i, size_t j) { return a[i * n + j]; }
    double at(size_t i, size_t j) const { return a[i * n + j]; }

    void pivot(size_t pr, size_t pc) {
        const double inv = 1.0 / at(pr, pc);
        for (size_t j = 0; j < n; ++j) at(pr, j) *= inv;
        rhs[pr] *= inv;
        at(pr, pc) = 1.0;
        for (size_t i = 0; i < m; ++i) {
            if (i == pr) continue;
            const double f = at(i, pc);
            if (f == 0.0) continue;
            for (size_t j = 0; j < n; ++j) at(i, j) -= f * at(pr, j);
            at(i, pc) = 0.0;
            rhs[i] -= f * rhs[pr];
        }
        const double f = red[pc];
        if (f != 0.0) {
            for (size_t j = 0; j < n; ++j) red[j] -= f * at(pr, j);
            red[pc] = 0.0;
            red_rhs -= f * rhs[pr];
        }
        basis[pr] = pc;
    }

    void set_cost(const std::vector<double>& c) {
        red = c;
        red_rhs = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double cb = c[basis[i]];
            if (cb == 0.0) continue;
            for (size_t j = 0; j < n; ++j) red[j] -= cb * at(i, j);
            red_rhs -= cb * rhs[i];
        }
        for (size_t i = 0; i < m; ++i) red[basis[i]] = 0.0;
    }

    // One Bland step. False means the current basis is optimal.
    bool step() {
        size_t enter = k_npos;
        for (size_t j = 0; j < n; ++j) {
            if (allowed[j] && red[j] < -k_lp_tol) {
                enter = j;
                break;
            }
        }
        if (enter == k_npos) return false;
        size_t leave = k_npos;
        double best = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double aij = at(i, enter);
            if (aij <= k_lp_tol) continue;
            const double ratio = rhs[i] / aij;
            if (leave == k_npos || ratio < best - k_lp_tol ||
                (ratio < best + k_lp_tol && basis[i] < basis[leave])) {
                leave = i;
                best = ratio;
            }
        }
        if (leave == k_npos)
            throw std::runtime_error("chebyshev_center: region is unbounded");
        pivot(leave, enter);
        return true;
    }

    double objective() const { return -red_rhs; }
};

std::vector<double> row_norms(const Mat& m) {
    std::vector<double> norms(m.rows());
    for (size_t k = 0; k < m.rows(); ++k) {
        double s = 0.0;
        for (size_t j = 0; j < m.cols(); ++j) s += m(k, j) * m(k, j);
        if (s == 0.0)
            throw std::invalid_argument(
                "chebyshev_center: constraint row " + std::to_string(k) +
                " is identically zero");
        norms[k] = std::sqrt(s);
    }
    return norms;
}

// Midpoint shortcut for axis-aligned boxes: every row touches one
// coordinate and every coordinate is bounded on both sides.
bool try_box(const Mat& m, const std::vector<double>& d,
             ChebyshevResult& out) {
    const size_t ny = m.cols();
    std::vector<double> lo(ny, -std::numeric_limits<double>::infinity());
    std::vector<double> hi(ny, std::numeric_limits<double>::infinity());
    for (size_t k = 0; k < m.rows(); ++k) {
        size_t idx = k_npos;
        for (size_t j = 0; j < ny; ++j) {
            if (m(k, j) == 0.0) continue;
            if (idx != k_npos) return false;  // row couples two coordinates
            idx = j;
        }
        const double c = m(k, idx);
        if (c > 0.0)
            hi[idx] = std::min(hi[idx], d[k] / c);
        else
            lo[idx] = std::max(lo[idx], d[k] / c);
    }
    out.center.assign(ny, 0.0);
    out.radius = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < ny; ++j) {
        if (!std::isfinite(lo[j]) || !std::isfinite(hi[j]))
            return false;  // open on one side; let the LP report unbounded
        if (lo[j] > hi[j] + k_lp_tol)
            throw std::runtime_error("chebyshev_center: region is empty");
        out.center[j] = 0.5 * (lo[j] + hi[j]);
        out.radius = std::min(out.radius, 0.5 * (hi[j] - lo[j]));
    }
    return true;
}

}  // namespace

void OptConfig::validate() const {
    if (n_noise == 0)
        throw std::invalid_argument("OptConfig: n_noise must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("OptConfig: lr must be positive");
    if (restarts == 0)
        throw std::invalid_argument("OptConfig: restarts must be positive");
}

ChebyshevResult chebyshev_center(const Mat& m, const std::vector<double>& d) {
    if (m.rows() != d.size())
        throw std::invalid_argument(
            "chebyshev_center: rows(M) != len(d)");
    if (m.cols() == 0)
        throw std::invalid_argument("chebyshev_center: M has no columns");
    if (m.rows() == 0)
        throw std::runtime_error("chebyshev_center: region is unbounded");
    const std::vector<double> norms = row_norms(m);

    ChebyshevResult out;
    if (try_box(m, d, out)) return out;

    // max r  s.t.  M(u - w) + r * norm <= d,  u, w, r >= 0.
    const size_t rows = m.rows();
    const size_t ny = m.cols();
    const size_t n_real = 2 * ny + 1;
    size_t n_art = 0;
    std::vector<char> flip(rows, 0);
    for (size_t k = 0; k < rows; ++k) {
        flip[k] = d[k] < 0.0;
        n_art += flip[k] ? 1 : 0;
    }

    Tableau t(rows, n_real + rows + n_art);
    size_t art = n_real + rows;
    for (size_t k = 0; k < rows; ++k) {
        const double sgn = flip[k] ? -1.0 : 1.0;
        for (size_t j = 0; j < ny; ++j) {
            t.at(k, j) = sgn * m(k, j);
            t.at(k, ny + j) = -sgn * m(k, j);
        }
        t.at(k, 2 * ny) = sgn * norms[k];
        t.at(k, n_real + k) = sgn;
        t.rhs[k] = sgn * d[k];
        if (flip[k]) {
            t.at(k, art) = 1.0;
            t.basis[k] = art++;
        } else {
            t.basis[k] = n_real + k;
        }
    }

    if (n_art > 0) {
        std::vector<double> c1(t.n, 0.0);
        for (size_t j = n_real + rows; j < t.n; ++j) c1[j] = 1.0;
        t.set_cost(c1);
        while (t.step()) {
        }
        if (t.objective() > k_feas_tol)
            throw std::runtime_error("chebyshev_center: region is empty");
        // Evict artificials stuck in the basis at value zero so phase 2
        // never trades through them. An all-zero row stays as-is.
        for (size_t i = 0; i < rows; ++i) {
            if (t.basis[i] < n_real + rows) continue;
            for (size_t j = 0; j < n_real + rows; ++j) {
                if (std::fabs(t.at(i, j)) > k_lp_tol) {
                    t.pivot(i, j);
                    break;
                }
            }
        }
        for (size_t j = n_real + rows; j < t.n; ++j) t.allowed[j] = 0;
    }

    std::vector<double> c2(t.n, 0.0);
    c2[2 * ny] = -1.0;
    t.set_cost(c2);
    while (t.step()) {
    }

    std::vector<double> sol(t.n, 0.0);
    for (size_t i = 0; i < rows; ++i)
        if (t.basis[i] < t.n) sol[t.basis[i]] = t.rhs[i];
    out.center.assign(ny, 0.0);
    for (size_t j = 0; j < ny; ++j) out.center[j] = sol[j] - sol[ny + j];
    out.radius = std::max(sol[2 * ny], 0.0);
    return out;
}

double estimate_success(const Mat& y, const Mat& m,
                        const std::vector<double>& d) {
    if (m.rows() != d.size())
        throw std::invalid_argument("estimate_success: rows(M) != len(d)");
    if (m.rows() == 0) return 1.0;  // constraint-free region
    if (y.cols() != m.cols())
        throw std::invalid_argument(
            "estimate_success: outcome arity does not match the region");
    if (y.rows() == 0)
        throw std::invalid_argument("estimate_success: no outcome samples");
    size_t hits = 0;
    for (size_t s = 0; s < y.rows(); ++s) {
        bool ok = true;
        for (size_t k = 0; k < m.rows() && ok; ++k) {
            double acc = 0.0;
            for (size_t j = 0; j < m.cols(); ++j) acc += m(k, j) * y(s, j);
            ok = acc <= d[k] + 1e-12;
        }
        hits += ok ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(y.rows());
}

double estimate_success(const JointSampler& t, const Mat& noises,
                        const std::vector<double>& x,
                        const std::vector<double>& z_a, const Mat& m,
                        const std::vector<double>& d) {
    return estimate_success(t.sample_y(noises, x, z_a), m, d);
}

DecisionResult optimize_decision(const JointSampler& t, const AufTask& task,
                                 const std::vector<double>& x,
                                 const OptConfig& cfg, uint64_t seed) {
    cfg.validate();
    const size_t na = task.alterable.size();
    if (task.domain.size() != na)
        throw std::invalid_argument(
            "optimize_decision: domain/alterable size mismatch");
    const size_t ny = t.outcomes().size();
    if (task.region_m.cols() != ny)
        throw std::invalid_argument(
            "optimize_decision: region arity does not match the sampler");

    const ChebyshevResult ball =
        chebyshev_center(task.region_m, task.region_d);
    Mat center_rows(ny, cfg.n_noise);
    for (size_t q = 0; q < ny; ++q)
        for (size_t i = 0; i < cfg.n_noise; ++i)
            center_rows(q, i) = ball.center[q];

    std::vector<double> lo(na), hi(na);
    for (size_t a = 0; a < na; ++a) {
        lo[a] = task.domain[a][0];
        hi[a] = task.domain[a][1];
        if (!(lo[a] <= hi[a]))
            throw std::invalid_argument(
                "optimize_decision: empty decision interval");
    }

    // One evaluation batch shared by every restart, so the winner is picked
    // on common random numbers rather than on luck of the draw.
    Rng eval_rng = stream(seed, "eval");
    const Mat eval_noise = normal_mat(cfg.n_noise, t.dim(), eval_rng);

    DecisionResult best;
    bool have_best = false;
    size_t diverged_count = 0;
    for (size_t rho = 0; rho < cfg.restarts; ++rho) {
        Rng noise_rng = stream(seed, "noise", rho);
        const Mat noises = normal_mat(cfg.n_noise, t.dim(), noise_rng);

        std::vector<double> z(na);
        if (rho == 0) {
            for (size_t a = 0; a < na; ++a) z[a] = 0.5 * (lo[a] + hi[a]);
        } else {
            Rng init_rng = stream(seed, "init", rho);
            for (size_t a = 0; a < na; ++a)
                z[a] = init_rng.uniform(lo[a], hi[a]);
        }

        ad::Adam adam({na}, cfg.lr);
        std::vector<double> trace;
        trace.reserve(cfg.iterations);
        bool diverged = false;
        for (size_t it = 0; it < cfg.iterations; ++it) {
            ad::Tape tape;
            Mat zm(na, 1);
            for (size_t a = 0; a < na; ++a) zm(a, 0) = z[a];
            ad::Val zv = tape.input(std::move(zm));
            ad::Val y = t.sample_y_taped(tape, noises, x, zv);
            ad::Val obj = ad::scale(
                ad::sum(ad::abs_v(ad::sub(y, tape.constant(center_rows)))),
                1.0 / static_cast<double>(cfg.n_noise));
            const double ov = obj.value()(0, 0);
            trace.push_back(ov);
            if (!std::isfinite(ov)) {
                diverged = true;
                break;
            }
            tape.backward(obj);
            try {
                adam.step({z.data()}, {zv.grad().data()});
            } catch (const std::runtime_error&) {
                diverged = true;
                break;
            }
            // Projection happens outside the tape: the next iteration's
            // graph starts from the clamped point.
            for (size_t a = 0; a < na; ++a)
                z[a] = std::clamp(z[a], lo[a], hi[a]);
        }
        if (diverged) {
            ++diverged_count;
            continue;
        }
        const double est = estimate_success(t, eval_noise, x, z,
                                            task.region_m, task.region_d);
        if (!have_best || est > best.est_success) {
            best.z_star = z;
            best.trace = std::move(trace);
            best.est_success = est;
            have_best = true;
        }
    }
    if (!have_best)
        throw std::runtime_error(
            "optimize_decision: all " + std::to_string(diverged_count) +
            " restarts hit non-finite objectives or gradients");
    return best;
}

OlemRh::OlemRh(const DataMatrix& data, AufTask task, const RhConfig& cfg,
               uint64_t seed)
    : task_(std::move(task)), cfg_(cfg) {
    cfg_.flow.validate();
    cfg_.opt.validate();
    for (size_t node : task_.alterable)
        if (node >= data.d)
            throw std::invalid_argument("OlemRh: alterable node out of range");
    EntropySource src = EntropySource::empirical(
        data, cfg_.knn_k, mix_seed(seed, hash_tag("jitter")));
    Order order = learn_order(src, cfg_.jobs);
    stack_ = fit_stack(data, order, cfg_.flow, mix_seed(seed, hash_tag("fit")),
                       cfg_.jobs);
    sampler_.emplace(build_joint_sampler(stack_, task_));
}

DecisionResult OlemRh::decide(const std::vector<double>& x,
                              uint64_t seed) const {
    return optimize_decision(*sampler_, task_, x, cfg_.opt, seed);
}

DecisionResult olem_rh(const DataMatrix& data, const AufTask& task,
                       const std::vector<double>& x, const RhConfig& cfg,
                       uint64_t seed) {
    OlemRh pipeline(data, task, cfg, mix_seed(seed, hash_tag("pipeline")));
    return pipeline.decide(x, mix_seed(seed, hash_tag("decide")));
}

}  // namespace auf
