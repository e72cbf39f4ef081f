#pragma once

#include "mwclass/multiway.hpp"
#include "mwclass/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mwclass {

// Mean-difference structure of the generative model.  rank == 1 draws a
// single Kronecker mean for class +1; rank == 2 additionally draws a
// Kronecker mean for class -1; rank > 2 sums independent Kronecker terms
// for class +1 only.
enum class TrueStructure { full, rank };

struct SignalSds {
    double sigma_s = 1.0;                    // full-structure mean draw
    double sigma_w = 1.0, sigma_v = 1.0;     // rank-1 and rank-r factors
    double sigma_w0 = 1.0, sigma_v0 = 1.0;   // rank-2 class -1 factors
    double sigma_w1 = 1.0, sigma_v1 = 1.0;   // rank-2 class +1 factors

    SignalSds scaled(double multiplier) const;
};

struct Scenario {
    int p = 1, m = 1;
    int n_train = 40;           // split evenly between classes
    int n_test_per_class = 50;
    TrueStructure structure = TrueStructure::full;
    int rank = 1;
    double sigma_e0 = 1.0, sigma_e1 = 1.0;
    SignalSds signal;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GeneratedExperiment {
    LabeledDataset train;
    LabeledDataset test;
    Vector true_mu0, true_mu1;  // length pm
    Vector bayes_direction;     // mu1 - mu0
    double sigma_e0 = 1.0, sigma_e1 = 1.0;
};

// Draws means and samples for one replicate.  Every replicate has its own
// streams for means, train noise per class, and test noise per class, so
// outputs are reproducible bit-for-bit under a fixed (seed, replicate).
GeneratedExperiment generate_replicate(const Scenario& scenario, int replicate);
GeneratedExperiment generate(const Scenario& scenario);

// Linear oracle for equal isotropic class covariances:
// sign(<mu1 - mu0, x - (mu0 + mu1)/2>), ties to +1.  Unequal noise SDs are
// rejected (the oracle would be quadratic).
int bayes_classify(const GeneratedExperiment& exp, const Vector& x);

struct CalibrationResult {
    SignalSds signal;
    double achieved_mis = 0.0;
    double multiplier = 0.0;
};

// Scales the signal SDs by bisection until the full DWD model's mean test
// misclassification over n_reps replicates is within +/-0.02 of target.
CalibrationResult calibrate_signal(int p, int m, TrueStructure structure, int rank,
                                   double sigma_e, double target_full_mis, int n_reps,
                                   int n_train = 40, std::uint64_t seed = 1,
                                   int workers = 0);

struct ModelSpec {
    std::string name;
    FitOptions opts;
};

struct ModelSummary {
    std::string name;
    double mean_mis = 0.0, se_mis = 0.0;
    double mean_cor = 0.0, se_cor = 0.0;
    int n_failed = 0;
    std::vector<double> mis;  // per replicate, NaN when the fit failed
    std::vector<double> cor;
};

struct ExperimentTable {
    std::vector<ModelSummary> rows;  // first row is the Bayes oracle
    int n_replicates = 0;
};

// Replicated comparison: per replicate and model, test misclassification and
// Pearson correlation between vec(B) and the true mean difference (absolute
// value for SVM fits, which do not fix a sign).  SEs are sample SD / sqrt(R).
ExperimentTable run_experiment(const Scenario& scenario, const std::vector<ModelSpec>& models,
                               int n_replicates, int workers = 0);

double normal_cdf(double x);

}  // namespace mwclass
