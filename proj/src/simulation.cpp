#include "mwclass/simulation.hpp"

#include "mwclass/parallel.hpp"
#include "mwclass/rng.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mwclass {

namespace {

constexpr std::uint64_t kMeansChannel = 0;
constexpr std::uint64_t kTrainNegChannel = 1;
constexpr std::uint64_t kTrainPosChannel = 2;
constexpr std::uint64_t kTestNegChannel = 3;
constexpr std::uint64_t kTestPosChannel = 4;
constexpr std::uint64_t kReplicateTag = 2;
constexpr std::uint64_t kCalibrationTag = 3;
constexpr std::uint64_t kModelTag = 4;

Vector gaussian_vector(Rng& rng, int len, double sd) {
    Vector out(len);
    for (int i = 0; i < len; ++i) out[i] = sd * rng.gaussian();
    return out;
}

// means per structure; class -1 carries mu0, class +1 carries mu1
void draw_means(const Scenario& s, Rng& rng, Vector& mu0, Vector& mu1) {
    const int pm = s.p * s.m;
    mu0 = Vector::Zero(pm);
    if (s.structure == TrueStructure::full) {
        mu1 = gaussian_vector(rng, pm, s.signal.sigma_s);
        return;
    }
    if (s.rank == 1) {
        Vector w = gaussian_vector(rng, s.p, s.signal.sigma_w);
        Vector v = gaussian_vector(rng, s.m, s.signal.sigma_v);
        mu1 = kron(v, w);
        return;
    }
    if (s.rank == 2) {
        Vector w0 = gaussian_vector(rng, s.p, s.signal.sigma_w0);
        Vector v0 = gaussian_vector(rng, s.m, s.signal.sigma_v0);
        mu0 = kron(v0, w0);
        Vector w1 = gaussian_vector(rng, s.p, s.signal.sigma_w1);
        Vector v1 = gaussian_vector(rng, s.m, s.signal.sigma_v1);
        mu1 = kron(v1, w1);
        return;
    }
    mu1 = Vector::Zero(pm);
    for (int z = 0; z < s.rank; ++z) {
        Vector w = gaussian_vector(rng, s.p, s.signal.sigma_w);
        Vector v = gaussian_vector(rng, s.m, s.signal.sigma_v);
        mu1 += kron(v, w);
    }
}

LabeledDataset sample_dataset(const Scenario& s, int n_neg, int n_pos, const Vector& mu0,
                              const Vector& mu1, Rng& rng_neg, Rng& rng_pos) {
    const int pm = s.p * s.m;
    Tensor3 tensor(n_neg + n_pos, s.p, s.m);
    std::vector<int> labels(static_cast<std::size_t>(n_neg + n_pos));
    double* out = tensor.values().data();
    for (int i = 0; i < n_neg; ++i) {
        for (int c = 0; c < pm; ++c) out[static_cast<std::size_t>(i) * pm + c] = mu0[c] + s.sigma_e0 * rng_neg.gaussian();
        labels[static_cast<std::size_t>(i)] = -1;
    }
    for (int i = 0; i < n_pos; ++i) {
        std::size_t row = static_cast<std::size_t>(n_neg + i);
        for (int c = 0; c < pm; ++c) out[row * pm + c] = mu1[c] + s.sigma_e1 * rng_pos.gaussian();
        labels[row] = 1;
    }
    return LabeledDataset{std::move(tensor), std::move(labels), {}, {}};
}

double pearson(const Vector& a, const Vector& b) {
    double ma = a.mean(), mb = b.mean();
    Vector ca = a.array() - ma;
    Vector cb = b.array() - mb;
    double denom = ca.norm() * cb.norm();
    if (denom == 0.0) return 0.0;
    return ca.dot(cb) / denom;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    int count = 0;
    for (double x : xs)
        if (std::isfinite(x)) {
            s += x;
            ++count;
        }
    return count > 0 ? s / count : std::numeric_limits<double>::quiet_NaN();
}

double se_of(const std::vector<double>& xs) {
    double m = mean_of(xs);
    double ss = 0.0;
    int count = 0;
    for (double x : xs)
        if (std::isfinite(x)) {
            ss += (x - m) * (x - m);
            ++count;
        }
    if (count < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(ss / (count - 1)) / std::sqrt(static_cast<double>(count));
}

double test_misclassification(const MultiwayModel& model, const LabeledDataset& test) {
    int errors = 0;
    for (int i = 0; i < test.tensor.n(); ++i) {
        if (model.predict(test.tensor.slice(i)) != test.labels[static_cast<std::size_t>(i)]) ++errors;
    }
    return static_cast<double>(errors) / test.tensor.n();
}

}  // namespace

SignalSds SignalSds::scaled(double multiplier) const {
    SignalSds out = *this;
    out.sigma_s *= multiplier;
    out.sigma_w *= multiplier;
    out.sigma_v *= multiplier;
    out.sigma_w0 *= multiplier;
    out.sigma_v0 *= multiplier;
    out.sigma_w1 *= multiplier;
    out.sigma_v1 *= multiplier;
    return out;
}

void Scenario::validate() const {
    if (p < 1 || m < 1) throw std::invalid_argument("Scenario: p, m must be >= 1");
    if (n_train < 2 || n_train % 2 != 0) {
        throw std::invalid_argument("Scenario: n_train must be even and >= 2");
    }
    if (n_test_per_class < 1) throw std::invalid_argument("Scenario: n_test_per_class must be >= 1");
    if (!(sigma_e0 > 0.0) || !(sigma_e1 > 0.0)) {
        throw std::invalid_argument("Scenario: noise SDs must be positive");
    }
    if (structure == TrueStructure::rank && rank < 1) {
        throw std::invalid_argument("Scenario: rank must be >= 1");
    }
    for (double sd : {signal.sigma_s, signal.sigma_w, signal.sigma_v, signal.sigma_w0,
                      signal.sigma_v0, signal.sigma_w1, signal.sigma_v1}) {
        if (!(sd >= 0.0)) throw std::invalid_argument("Scenario: signal SDs must be nonnegative");
    }
}

GeneratedExperiment generate_replicate(const Scenario& scenario, int replicate) {
    scenario.validate();
    const auto rep = static_cast<std::uint64_t>(replicate);
    Rng rng_means(substream(scenario.seed, kReplicateTag, rep, kMeansChannel));
    GeneratedExperiment exp;
    draw_means(scenario, rng_means, exp.true_mu0, exp.true_mu1);
    exp.bayes_direction = exp.true_mu1 - exp.true_mu0;
    exp.sigma_e0 = scenario.sigma_e0;
    exp.sigma_e1 = scenario.sigma_e1;

    Rng train_neg(substream(scenario.seed, kReplicateTag, rep, kTrainNegChannel));
    Rng train_pos(substream(scenario.seed, kReplicateTag, rep, kTrainPosChannel));
    exp.train = sample_dataset(scenario, scenario.n_train / 2, scenario.n_train / 2,
                               exp.true_mu0, exp.true_mu1, train_neg, train_pos);

    Rng test_neg(substream(scenario.seed, kReplicateTag, rep, kTestNegChannel));
    Rng test_pos(substream(scenario.seed, kReplicateTag, rep, kTestPosChannel));
    exp.test = sample_dataset(scenario, scenario.n_test_per_class, scenario.n_test_per_class,
                              exp.true_mu0, exp.true_mu1, test_neg, test_pos);
    return exp;
}

GeneratedExperiment generate(const Scenario& scenario) {
    return generate_replicate(scenario, 0);
}

int bayes_classify(const GeneratedExperiment& exp, const Vector& x) {
    if (exp.sigma_e0 != exp.sigma_e1) {
        throw std::invalid_argument(
            "bayes_classify: linear oracle requires equal class noise SDs "
            "(unequal SDs give a quadratic rule, which is unsupported)");
    }
    if (x.size() != exp.bayes_direction.size()) {
        throw std::invalid_argument("bayes_classify: dimension mismatch");
    }
    Vector mid = 0.5 * (exp.true_mu0 + exp.true_mu1);
    return exp.bayes_direction.dot(x - mid) >= 0.0 ? 1 : -1;
}

CalibrationResult calibrate_signal(int p, int m, TrueStructure structure, int rank,
                                   double sigma_e, double target_full_mis, int n_reps,
                                   int n_train, std::uint64_t seed, int workers) {
    if (!(target_full_mis > 0.0) || !(target_full_mis <= 0.5)) {
        throw std::invalid_argument("calibrate_signal: target must lie in (0, 0.5]");
    }
    if (n_reps < 1) throw std::invalid_argument("calibrate_signal: n_reps must be >= 1");
    const double tol = 0.02;

    Scenario base;
    base.p = p;
    base.m = m;
    base.n_train = n_train;
    base.n_test_per_class = 50;
    base.structure = structure;
    base.rank = rank;
    base.sigma_e0 = sigma_e;
    base.sigma_e1 = sigma_e;
    base.seed = substream(seed, kCalibrationTag);

    // mean full-model test misclassification; replicate seeds shared across
    // multiplier evaluations (common random numbers)
    auto evaluate = [&](double multiplier) {
        Scenario s = base;
        s.signal = base.signal.scaled(multiplier);
        std::vector<double> mis(static_cast<std::size_t>(n_reps));
        parallel_for(n_reps, workers, [&](int rep) {
            GeneratedExperiment exp = generate_replicate(s, rep);
            FitOptions opts;
            opts.seed = substream(s.seed, kModelTag, static_cast<std::uint64_t>(rep));
            MultiwayModel model = fit_full(exp.train, Solver::dwd, opts);
            mis[static_cast<std::size_t>(rep)] = test_misclassification(model, exp.test);
        });
        return mean_of(mis);
    };

    double lo = 0.0;
    double mis_lo = evaluate(lo);
    // zero signal already at or below target: nothing to calibrate
    if (mis_lo <= target_full_mis + tol) {
        return CalibrationResult{base.signal.scaled(lo), mis_lo, lo};
    }

    double hi = 1.0;
    double mis_hi = evaluate(hi);
    int expansions = 0;
    while (mis_hi > target_full_mis + tol && expansions < 24) {
        lo = hi;
        mis_lo = mis_hi;
        hi *= 2.0;
        mis_hi = evaluate(hi);
        ++expansions;
    }
    if (std::abs(mis_hi - target_full_mis) <= tol) {
        return CalibrationResult{base.signal.scaled(hi), mis_hi, hi};
    }
    if (mis_hi > target_full_mis + tol) {
        std::ostringstream msg;
        msg << "calibrate_signal: target " << target_full_mis
            << " unreachable; bracket multipliers [" << lo << ", " << hi
            << "] give misclassification [" << mis_lo << ", " << mis_hi << "]";
        throw std::runtime_error(msg.str());
    }

    for (int step = 0; step < 60; ++step) {
        double mid = 0.5 * (lo + hi);
        double mis_mid = evaluate(mid);
        if (std::abs(mis_mid - target_full_mis) <= tol) {
            return CalibrationResult{base.signal.scaled(mid), mis_mid, mid};
        }
        if (mis_mid > target_full_mis) {
            lo = mid;
            mis_lo = mis_mid;
        } else {
            hi = mid;
            mis_hi = mis_mid;
        }
    }
    std::ostringstream msg;
    msg << "calibrate_signal: bisection stalled; bracket multipliers [" << lo << ", " << hi
        << "] give misclassification [" << mis_lo << ", " << mis_hi << "]";
    throw std::runtime_error(msg.str());
}

ExperimentTable run_experiment(const Scenario& scenario, const std::vector<ModelSpec>& models,
                               int n_replicates, int workers) {
    scenario.validate();
    if (n_replicates < 2) throw std::invalid_argument("run_experiment: need >= 2 replicates");

    ExperimentTable table;
    table.n_replicates = n_replicates;
    table.rows.resize(models.size() + 1);
    table.rows[0].name = "bayes";
    for (std::size_t mi = 0; mi < models.size(); ++mi) table.rows[mi + 1].name = models[mi].name;
    for (auto& row : table.rows) {
        row.mis.assign(static_cast<std::size_t>(n_replicates),
                       std::numeric_limits<double>::quiet_NaN());
        row.cor = row.mis;
    }

    parallel_for(n_replicates, workers, [&](int rep) {
        GeneratedExperiment exp = generate_replicate(scenario, rep);

        int bayes_errors = 0;
        for (int i = 0; i < exp.test.tensor.n(); ++i) {
            if (bayes_classify(exp, Vector(exp.test.tensor.vec_sample(i))) !=
                exp.test.labels[static_cast<std::size_t>(i)]) {
                ++bayes_errors;
            }
        }
        table.rows[0].mis[static_cast<std::size_t>(rep)] =
            static_cast<double>(bayes_errors) / exp.test.tensor.n();
        table.rows[0].cor[static_cast<std::size_t>(rep)] = 1.0;

        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            FitOptions opts = models[mi].opts;
            opts.seed = substream(scenario.seed, kModelTag, static_cast<std::uint64_t>(rep),
                                  static_cast<std::uint64_t>(mi));
            try {
                MultiwayModel model = fit(exp.train, opts);
                double cor = pearson(vectorize(model.b), exp.bayes_direction);
                if (opts.solver == Solver::svm) cor = std::abs(cor);
                table.rows[mi + 1].mis[static_cast<std::size_t>(rep)] =
                    test_misclassification(model, exp.test);
                table.rows[mi + 1].cor[static_cast<std::size_t>(rep)] = cor;
            } catch (const std::exception&) {
                // failed replicate recorded as NaN and counted below
            }
        }
    });

    for (auto& row : table.rows) {
        row.mean_mis = mean_of(row.mis);
        row.se_mis = se_of(row.mis);
        row.mean_cor = mean_of(row.cor);
        row.se_cor = se_of(row.cor);
        row.n_failed = 0;
        for (double x : row.mis)
            if (!std::isfinite(x)) ++row.n_failed;
    }
    return table;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace mwclass
