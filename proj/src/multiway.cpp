#include "mwclass/multiway.hpp"

#include "mwclass/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mwclass {

namespace {

constexpr std::uint64_t kRestartTag = 1;

struct AcsRun {
    Matrix w, v;  // raw converged factors (columns per component)
    Matrix b;     // p x m
    double beta = 0.0;
    FitTrace trace;
};

double resolve_lambda(const FitOptions& opts, int n) {
    return opts.svm.lambda > 0.0 ? opts.svm.lambda : 1.0 / static_cast<double>(n);
}

int resolve_restarts(const FitOptions& opts, Solver solver) {
    if (opts.restarts > 0) return opts.restarts;
    return solver == Solver::dwd ? 1 : 5;
}

// Median cross-class distance -> program-level penalty.  The distance rule
// gives the penalty in the units of the classical DWD implementations,
// which normalize by the squared median cross-class distance of the data
// they are handed; dividing by d^2 converts to the coefficient the
// objective sum(1/r_i) + C 1'xi uses directly.  The rule then makes every
// half-step share the full-scale value 100/D^2.  Degenerate distances fall
// back to that same constant, flagged.
double half_step_penalty(const Matrix& x, const std::vector<int>& y, double big_d,
                         bool* fallback) {
    double d = median_pairwise_distance(x, y);
    if (d > 0.0 && big_d > 0.0) return dwd_penalty_from_distance(d, big_d) / (d * d);
    *fallback = true;
    if (big_d > 0.0) return 100.0 / (big_d * big_d);
    return 1.0;
}

// One half-step fit.  The carried-in iterate (the previous composite B in
// this half-step's frame) is evaluated under the same data and penalty and
// recorded next to the optimum, which is what alternating descent bounds.
LinearModel inner_fit(const Matrix& x, const std::vector<int>& y, Solver solver,
                      const FitOptions& opts, double big_d, const Vector& start_coef,
                      double start_beta, FitTrace& trace) {
    if (solver == Solver::dwd) {
        DwdConfig config = opts.dwd;
        bool fallback = false;
        config.c = half_step_penalty(x, y, big_d, &fallback);
        if (fallback) trace.penalty_fallback = true;
        LinearModel model = dwd_fit(x, y, config);
        trace.objective_starts.push_back(dwd_objective(x, y, config.c, start_coef, start_beta));
        trace.objectives.push_back(model.objective_value);
        return model;
    }
    SvmConfig config = opts.svm;
    config.lambda = resolve_lambda(opts, static_cast<int>(x.cols()));
    LinearModel model = svm_fit(x, y, config);
    trace.objective_starts.push_back(svm_objective(x, y, config.lambda, start_coef, start_beta));
    trace.objectives.push_back(model.objective_value);
    return model;
}

Vector unit_normalized(const Matrix& b) {
    Vector flat = vectorize(b);
    double norm = flat.norm();
    if (norm > 0.0) flat /= norm;
    return flat;
}

void normalize_in_place(Vector& x) {
    double norm = x.norm();
    if (norm > 0.0) x /= norm;
}

AcsRun run_rank1(const Tensor3& tensor, const std::vector<int>& y, Solver solver,
                 const FitOptions& opts, double big_d, std::uint64_t stream_seed) {
    const int p = tensor.p();
    const int m = tensor.m();
    Rng rng(stream_seed);

    Vector w(p), v(m);
    for (int j = 0; j < p; ++j) w[j] = rng.uniform01();
    for (int k = 0; k < m; ++k) v[k] = rng.uniform01();
    normalize_in_place(w);
    normalize_in_place(v);

    AcsRun run;
    Vector prev_b = unit_normalized(w * v.transpose());
    double beta = 0.0;

    for (int iter = 0; iter < opts.max_acs_iterations; ++iter) {
        if (solver == Solver::svm) normalize_in_place(v);
        Matrix xw = mode2_product(tensor, v).transpose();  // p x n
        LinearModel model_w = inner_fit(xw, y, solver, opts, big_d, w, beta, run.trace);
        w = model_w.b;

        if (solver == Solver::svm) normalize_in_place(w);
        Matrix xv = mode1_product(tensor, w).transpose();  // m x n
        LinearModel model_v = inner_fit(xv, y, solver, opts, big_d, v, model_w.beta, run.trace);
        v = model_v.b;
        beta = model_v.beta;
        run.trace.final_inner_objective = run.trace.objectives.back();

        Vector cur_b = unit_normalized(w * v.transpose());
        double delta = (cur_b - prev_b).norm();
        run.trace.delta_b.push_back(delta);
        prev_b = cur_b;
        run.trace.iterations = iter + 1;
        if (delta < opts.epsilon) {
            run.trace.converged = true;
            break;
        }
    }

    run.w = w;
    run.v = v;
    run.b = w * v.transpose();
    run.beta = beta;
    return run;
}

AcsRun run_rankr(const Tensor3& tensor, const std::vector<int>& y, Solver solver,
                 const FitOptions& opts, double big_d, std::uint64_t stream_seed) {
    const int p = tensor.p();
    const int m = tensor.m();
    const int r = opts.rank.r;
    const int n = tensor.n();
    Rng rng(stream_seed);

    Matrix w0(p, r), v0(m, r);
    for (int z = 0; z < r; ++z)
        for (int j = 0; j < p; ++j) w0(j, z) = rng.uniform01();
    for (int z = 0; z < r; ++z)
        for (int k = 0; k < m; ++k) v0(k, z) = rng.uniform01();

    Matrix b_v = w0 * v0.transpose();
    double b_norm = b_v.norm();
    if (b_norm > 0.0) b_v /= b_norm;

    AcsRun run;
    Vector prev_b = unit_normalized(b_v);
    Matrix w_cols(p, r), v_tilde(m, r);
    double beta = 0.0;

    for (int iter = 0; iter < opts.max_acs_iterations; ++iter) {
        ThinSvd svd_v = thin_svd(b_v, r);

        Matrix xw(static_cast<Eigen::Index>(r) * p, n);
        Vector w_start(static_cast<Eigen::Index>(r) * p);
        for (int z = 0; z < r; ++z) {
            xw.middleRows(static_cast<Eigen::Index>(z) * p, p) =
                mode2_product(tensor, svd_v.v.col(z)).transpose();
            // previous composite B expressed in the new frame: B v_z = s_z u_z
            w_start.segment(static_cast<Eigen::Index>(z) * p, p) = svd_v.s[z] * svd_v.u.col(z);
        }
        LinearModel model_w = inner_fit(xw, y, solver, opts, big_d, w_start, beta, run.trace);
        Matrix b_w = Matrix::Zero(p, m);
        for (int z = 0; z < r; ++z) {
            b_w += model_w.b.segment(static_cast<Eigen::Index>(z) * p, p) *
                   svd_v.v.col(z).transpose();
        }

        ThinSvd svd_w = thin_svd(b_w, r);
        w_cols = svd_w.u;
        Matrix xv(static_cast<Eigen::Index>(r) * m, n);
        Vector v_start(static_cast<Eigen::Index>(r) * m);
        for (int z = 0; z < r; ++z) {
            xv.middleRows(static_cast<Eigen::Index>(z) * m, m) =
                mode1_product(tensor, w_cols.col(z)).transpose();
            v_start.segment(static_cast<Eigen::Index>(z) * m, m) = svd_w.s[z] * svd_w.v.col(z);
        }
        LinearModel model_v = inner_fit(xv, y, solver, opts, big_d, v_start, model_w.beta, run.trace);
        b_v.setZero();
        for (int z = 0; z < r; ++z) {
            v_tilde.col(z) = model_v.b.segment(static_cast<Eigen::Index>(z) * m, m);
            b_v += w_cols.col(z) * v_tilde.col(z).transpose();
        }
        beta = model_v.beta;
        run.trace.final_inner_objective = run.trace.objectives.back();

        Vector cur_b = unit_normalized(b_v);
        double delta = (cur_b - prev_b).norm();
        run.trace.delta_b.push_back(delta);
        prev_b = cur_b;
        run.trace.iterations = iter + 1;
        if (delta < opts.epsilon) {
            run.trace.converged = true;
            break;
        }
    }

    run.w = w_cols;
    run.v = v_tilde;
    run.b = b_v;
    run.beta = beta;
    return run;
}

// Restart loop shared by rank-1 and rank-r: converged runs are preferred,
// then the smallest final inner objective, then seed order.
MultiwayModel fit_rank_common(const LabeledDataset& data, Solver solver,
                              const FitOptions& opts, bool rank1) {
    data.validate_for_fit();
    if (!(opts.epsilon > 0.0)) throw std::invalid_argument("fit: epsilon must be positive");
    if (opts.max_acs_iterations < 1) {
        throw std::invalid_argument("fit: max_acs_iterations must be >= 1");
    }
    const Tensor3* tensor = &data.tensor;
    Tensor3 standardized(1, 1, 1);
    std::optional<Standardizer> standardizer;
    if (opts.standardize) {
        standardizer = fit_standardizer(data.tensor);
        standardized = standardizer->apply(data.tensor);
        tensor = &standardized;
    }

    double big_d = 0.0;
    if (solver == Solver::dwd) {
        Matrix flat = tensor->as_vectorized();
        big_d = median_pairwise_distance(flat, data.labels);
    }

    const int restarts = resolve_restarts(opts, solver);
    AcsRun best;
    int best_index = -1;
    for (int restart = 0; restart < restarts; ++restart) {
        std::uint64_t stream = substream(opts.seed, kRestartTag, static_cast<std::uint64_t>(restart));
        AcsRun run = rank1 ? run_rank1(*tensor, data.labels, solver, opts, big_d, stream)
                           : run_rankr(*tensor, data.labels, solver, opts, big_d, stream);
        bool better;
        if (best_index < 0) {
            better = true;
        } else if (run.trace.converged != best.trace.converged) {
            better = run.trace.converged;
        } else {
            better = run.trace.final_inner_objective < best.trace.final_inner_objective;
        }
        if (better) {
            best = std::move(run);
            best_index = restart;
        }
    }

    best.trace.restarts_run = restarts;
    best.trace.best_restart = best_index;
    best.trace.w_raw = best.w;
    best.trace.v_raw = best.v;

    MultiwayModel model;
    model.rank = opts.rank;
    model.beta = best.beta;
    model.solver = solver;
    model.standardizer = standardizer;
    model.fit_trace = std::move(best.trace);
    model.dim1_names = data.dim1_names;
    model.dim2_names = data.dim2_names;

    // identifiability normalization of the report: unit-norm signed V
    // columns, scale absorbed into W
    ThinSvd svd = thin_svd(best.b, opts.rank.r);
    model.v = svd.v;
    model.w = svd.u * svd.s.asDiagonal();
    model.b = model.w * model.v.transpose();
    return model;
}

}  // namespace

Rank Rank::of(int r) {
    if (r < 1) throw std::invalid_argument("Rank: r must be >= 1");
    return Rank{false, r};
}

Tensor3 Standardizer::apply(const Tensor3& x) const {
    Tensor3 out(x.n(), x.p(), x.m());
    for (int i = 0; i < x.n(); ++i) {
        Matrix z = apply(Matrix(x.slice(i)));
        for (int k = 0; k < x.m(); ++k)
            for (int j = 0; j < x.p(); ++j) out(i, j, k) = z(j, k);
    }
    return out;
}

Standardizer fit_standardizer(const Tensor3& x) {
    const int n = x.n();
    Standardizer st;
    st.mean = Matrix::Zero(x.p(), x.m());
    st.sd = Matrix::Zero(x.p(), x.m());
    for (int i = 0; i < n; ++i) st.mean += x.slice(i);
    st.mean /= static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
        Matrix centered = x.slice(i) - st.mean;
        st.sd += centered.cwiseProduct(centered);
    }
    if (n > 1) st.sd /= static_cast<double>(n - 1);
    st.sd = st.sd.cwiseSqrt();
    // constant cells stay centered but unscaled
    st.sd = (st.sd.array() > 0.0).select(st.sd, Matrix::Ones(x.p(), x.m()));
    return st;
}

double MultiwayModel::score(const Matrix& x) const {
    if (x.rows() != b.rows() || x.cols() != b.cols()) {
        throw std::invalid_argument("predict: input must be p x m");
    }
    double base;
    if (standardizer) {
        base = vectorize(b).dot(vectorize(standardizer->apply(x)));
    } else {
        base = vectorize(b).dot(vectorize(x));
    }
    return solver == Solver::dwd ? base + beta : base - beta;
}

int MultiwayModel::predict(const Matrix& x) const {
    return score(x) >= 0.0 ? 1 : -1;
}

MultiwayModel fit_full(const LabeledDataset& data, Solver solver, const FitOptions& opts) {
    data.validate_for_fit();
    const Tensor3* tensor = &data.tensor;
    Tensor3 standardized(1, 1, 1);
    std::optional<Standardizer> standardizer;
    if (opts.standardize) {
        standardizer = fit_standardizer(data.tensor);
        standardized = standardizer->apply(data.tensor);
        tensor = &standardized;
    }

    Matrix x = tensor->as_vectorized();
    FitTrace trace;
    LinearModel inner;
    if (solver == Solver::dwd) {
        DwdConfig config = opts.dwd;
        double big_d = median_pairwise_distance(x, data.labels);
        bool fallback = false;
        if (big_d > 0.0) {
            // user-level 100 at full scale, program-level 100/D^2
            config.c = dwd_penalty_from_distance(big_d, big_d) / (big_d * big_d);
        } else {
            config.c = 1.0;
            fallback = true;
        }
        inner = dwd_fit(x, data.labels, config);
        trace.penalty_fallback = fallback;
        trace.objectives.push_back(inner.objective_value);
    } else {
        SvmConfig config = opts.svm;
        config.lambda = resolve_lambda(opts, tensor->n());
        inner = svm_fit(x, data.labels, config);
        trace.objectives.push_back(inner.objective_value);
    }
    trace.converged = inner.diagnostics.converged;
    trace.final_inner_objective = trace.objectives.back();

    MultiwayModel model;
    model.rank = Rank::Full();
    model.b = unvectorize(inner.b, tensor->p(), tensor->m());
    model.beta = inner.beta;
    model.solver = solver;
    model.standardizer = standardizer;
    model.fit_trace = std::move(trace);
    model.dim1_names = data.dim1_names;
    model.dim2_names = data.dim2_names;
    return model;
}

MultiwayModel fit_rank1(const LabeledDataset& data, Solver solver, const FitOptions& opts) {
    FitOptions local = opts;
    local.rank = Rank::of(1);
    return fit_rank_common(data, solver, local, /*rank1=*/true);
}

MultiwayModel fit_rankr(const LabeledDataset& data, Solver solver, const FitOptions& opts) {
    if (opts.rank.full) throw std::invalid_argument("fit_rankr: rank must be finite");
    const int cap = std::min(data.tensor.p(), data.tensor.m());
    if (opts.rank.r < 1 || opts.rank.r > cap) {
        throw std::invalid_argument("fit_rankr: rank must satisfy 1 <= r <= min(p, m)");
    }
    return fit_rank_common(data, solver, opts, /*rank1=*/false);
}

MultiwayModel fit(const LabeledDataset& data, const FitOptions& opts) {
    if (opts.rank.full) return fit_full(data, opts.solver, opts);
    if (opts.rank.r == 1) return fit_rank1(data, opts.solver, opts);
    return fit_rankr(data, opts.solver, opts);
}

}  // namespace mwclass
