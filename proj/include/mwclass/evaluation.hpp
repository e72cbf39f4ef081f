#pragma once

#include "mwclass/multiway.hpp"
#include "mwclass/tensor.hpp"

#include <cstdint>
#include <vector>

namespace mwclass {

struct EvalReport {
    std::vector<double> per_sample_scores;  // held-out score per sample, NaN on fold failure
    double misclassification_rate = 0.0;
    double t_statistic = 0.0;  // Welch t on the held-out scores, NaN if degenerate
    std::vector<bool> per_fold_converged;
    std::vector<bool> per_fold_failed;
    int n_failed_folds = 0;
};

// Leave-one-out cross-validation: each sample is scored by a model fit on
// the remaining n-1 samples, with a deterministic per-fold seed stream.
// A failed fold is flagged and counted as a misclassification.
EvalReport loocv(const LabeledDataset& data, const FitOptions& opts, int workers = 0);

// Seed used for fold i's model fit (part of the reproducibility contract).
std::uint64_t loocv_fold_seed(std::uint64_t seed, int fold);

// Row indices drawn for one stratified resample: class counts match the
// original data, sampling is with replacement within each class.
std::vector<int> bootstrap_resample_rows(const LabeledDataset& data, std::uint64_t draw_seed);

// Welch two-sample t on scores grouped by label:
// (mean+ - mean-) / sqrt(s+^2/n+ + s-^2/n-), variances with n-1 denominators.
// Requires >= 2 samples per class; both variances zero is allowed only with
// equal means (t = 0).
double t_statistic(const std::vector<double>& scores, const std::vector<int>& labels);

struct BootstrapReport {
    int n_boot = 0;
    Matrix w_point, v_point;          // normalized point estimates
    Matrix w_lower, w_upper;          // entrywise 2.5% / 97.5% quantiles
    Matrix v_lower, v_upper;
    std::vector<std::uint64_t> resample_seeds;
    int n_failed = 0;
};

// Stratified bootstrap for factor weights: resamples within each class with
// replacement (original class counts preserved), refits, aligns each
// resample's component signs to the point estimate, and takes entrywise
// empirical quantiles (linear-interpolation definition).
BootstrapReport bootstrap_weights(const LabeledDataset& data, const FitOptions& opts,
                                  int n_boot, int workers = 0);

struct RankSelectionRow {
    Rank rank;
    double misclassification = 0.0;
    double t = 0.0;
    bool selected = false;
};

// LOOCV per candidate rank with per-rank seed streams; flags the rank with
// the lowest misclassification (ties: larger |t|, then lower rank, FULL last).
std::vector<RankSelectionRow> rank_selection(const LabeledDataset& data, Solver solver,
                                             const std::vector<Rank>& ranks,
                                             const FitOptions& opts, int workers = 0);

// Linear-interpolation empirical quantile (sorted copy taken internally).
double quantile(std::vector<double> values, double q);

// Informational note emitted by rank selection for known public-dataset
// shapes (currently the 53 x 76 x 7 gene time-course layout); empty
// otherwise.  Reporting only, never a gate.
std::string rank_selection_note(int n, int p, int m);

}  // namespace mwclass
