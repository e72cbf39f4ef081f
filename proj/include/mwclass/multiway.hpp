#pragma once

#include "mwclass/classifiers.hpp"
#include "mwclass/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mwclass {

// Model rank: a positive integer or FULL (unconstrained coefficient matrix).
struct Rank {
    bool full = false;
    int r = 1;

    static Rank Full() { return Rank{true, 0}; }
    static Rank of(int r);
    bool operator==(const Rank&) const = default;
};

struct FitOptions {
    Solver solver = Solver::dwd;
    Rank rank = Rank::of(1);
    // convergence threshold on the change of unit-normalized vec(B) between iterations
    double epsilon = 1e-5;
    int max_acs_iterations = 100;
    int restarts = 0;  // 0 -> solver default (1 for DWD, 5 for SVM)
    std::uint64_t seed = 0;
    bool standardize = false;
    DwdConfig dwd{};             // .c is recomputed per half-step from the distance rule
    SvmConfig svm{0.0, 1e-6, 20000};  // .lambda == 0 -> 1/n resolved at fit time
};

// Per-cell z-scoring transform learned on training data.  Constant cells
// (zero variance) are centered only.
struct Standardizer {
    Matrix mean;  // p x m
    Matrix sd;    // p x m, entries > 0

    Matrix apply(const Matrix& x) const { return (x - mean).cwiseQuotient(sd); }
    Tensor3 apply(const Tensor3& x) const;
};

Standardizer fit_standardizer(const Tensor3& x);

struct FitTrace {
    // Inner objective after each half-step, paired with the value of the
    // carried-in iterate under that same half-step's data and penalty.
    // Alternating descent means objectives[k] <= objective_starts[k] up to
    // solver tolerance; consecutive half-steps use different penalties, so
    // raw end values are not comparable across steps.
    std::vector<double> objectives;
    std::vector<double> objective_starts;
    std::vector<double> delta_b;  // per-iteration change of unit-normalized vec(B)
    int iterations = 0;
    bool converged = false;
    int restarts_run = 1;
    int best_restart = 0;
    bool penalty_fallback = false;  // a half-step hit zero cross-class distance
    double final_inner_objective = 0.0;
    Matrix w_raw, v_raw;  // converged factors before report normalization
};

struct MultiwayModel {
    Rank rank;
    Matrix w;  // p x r, scale-carrying (empty for FULL)
    Matrix v;  // m x r, unit-norm columns under the thin_svd sign convention
    Matrix b;  // p x m, equals w * v' for rank models
    double beta = 0.0;
    Solver solver = Solver::dwd;
    std::optional<Standardizer> standardizer;
    FitTrace fit_trace;
    std::vector<std::string> dim1_names, dim2_names;

    // <vec(B), vec(x)> + beta (DWD) or - beta (SVM), after standardization
    double score(const Matrix& x) const;
    int predict(const Matrix& x) const;  // ties resolved to +1
};

// One inner fit on vectorized samples (pm covariates); DWD penalty fixed at
// the distance rule's full-scale value.
MultiwayModel fit_full(const LabeledDataset& data, Solver solver, const FitOptions& opts);

// Alternating search over B = w v': each iteration fits w with v fixed,
// then v with w fixed, with the DWD penalty recomputed per half-step.
MultiwayModel fit_rank1(const LabeledDataset& data, Solver solver, const FitOptions& opts);

// Rank-r alternating search; an SVD after each half-step keeps the factors
// identifiable (orthonormal fixed block, scale in the free block).
MultiwayModel fit_rankr(const LabeledDataset& data, Solver solver, const FitOptions& opts);

// Dispatches to fit_full / fit_rank1 / fit_rankr based on opts.rank.
MultiwayModel fit(const LabeledDataset& data, const FitOptions& opts);

}  // namespace mwclass
