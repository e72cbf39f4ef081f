#pragma once

#include "mwclass/tensor.hpp"

#include <vector>

namespace mwclass {

enum class Solver { dwd, svm };

struct SolverDiagnostics {
    int iterations = 0;
    double residual = 0.0;  // final optimality residual (gradient mapping / KKT gap)
    bool converged = false;
};

// Linear classifier: coefficients b, intercept beta.  The margin expression
// differs between the two training objectives (x'b + beta for DWD,
// x'b - beta for SVM); score() hides the difference.
struct LinearModel {
    Vector b;
    double beta = 0.0;
    double objective_value = 0.0;
    Solver solver = Solver::dwd;
    SolverDiagnostics diagnostics;

    double score(const Vector& x) const;
    // sign of score, ties (score exactly 0) resolved to +1
    int predict(const Vector& x) const;
};

struct DwdConfig {
    double c = 100.0;
    double tolerance = 1e-6;
    int max_iterations = 200;
};

struct SvmConfig {
    double lambda = 0.01;
    double tolerance = 1e-6;
    int max_iterations = 20000;
};

// Minimizes sum_i 1/r_i + C 1'xi over r = Y X'b + beta y + xi >= 0,
// ||b|| <= 1, xi >= 0.  The slack enters in closed form
// (xi_i = max(0, 1/sqrt(C) - margin_i)), which reduces the program to a
// smooth convex loss over the unit ball, solved by projected accelerated
// gradient descent with backtracking and adaptive restart.
// x holds one sample per column (d x n).
LinearModel dwd_fit(const Matrix& x, const std::vector<int>& y, const DwdConfig& config);

// Minimizes (1/n) sum_i max(0, 1 - y_i(x_i'b - beta)) + lambda ||b||^2 by
// SMO on the dual (maximal violating pair selection), then recovers the
// exact intercept by one-dimensional piecewise-linear minimization.
LinearModel svm_fit(const Matrix& x, const std::vector<int>& y, const SvmConfig& config);

// Penalty rule for reduced datasets: 100 * d_w^2 / D^2.
double dwd_penalty_from_distance(double d_w, double big_d);

// Median of all cross-class pairwise Euclidean distances; even counts use
// the mean of the two central order statistics.
double median_pairwise_distance(const Matrix& x, const std::vector<int>& y);

// Objective re-evaluation helpers (slack/hinge written out explicitly).
double dwd_objective(const Matrix& x, const std::vector<int>& y, double c,
                     const Vector& b, double beta);
double svm_objective(const Matrix& x, const std::vector<int>& y, double lambda,
                     const Vector& b, double beta);

}  // namespace mwclass
