#include "mwclass/simulation.hpp"

#include "mwclass/tensor.hpp"

#include <doctest.h>

#include <cmath>

using namespace mwclass;

TEST_CASE("generate is bit-reproducible under a fixed seed") {
    Scenario s;
    s.p = 6;
    s.m = 3;
    s.n_train = 8;
    s.n_test_per_class = 4;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.seed = 7;
    GeneratedExperiment a = generate(s);
    GeneratedExperiment b = generate(s);
    CHECK(a.train.tensor.values() == b.train.tensor.values());
    CHECK(a.test.tensor.values() == b.test.tensor.values());
    CHECK(a.true_mu1 == b.true_mu1);

    GeneratedExperiment c = generate_replicate(s, 1);
    CHECK(a.train.tensor.values() != c.train.tensor.values());
}

TEST_CASE("vanishing full signal gives a zero mean difference") {
    Scenario s;
    s.p = 3;
    s.m = 2;
    s.n_train = 6;
    s.structure = TrueStructure::full;
    s.signal.sigma_s = 0.0;
    s.seed = 1;
    GeneratedExperiment exp = generate(s);
    CHECK(exp.true_mu1.norm() == 0.0);
    CHECK(exp.bayes_direction.norm() == 0.0);
}

TEST_CASE("rank-1 structure produces a numerically rank-1 mean") {
    Scenario s;
    s.p = 7;
    s.m = 4;
    s.n_train = 6;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.seed = 5;
    GeneratedExperiment exp = generate(s);
    ThinSvd svd = thin_svd(unvectorize(exp.true_mu1, 7, 4), 4);
    CHECK(svd.s[1] < 1e-10 * svd.s[0]);

    // rank-2 structure: mean difference matrix has numerical rank <= 2
    s.rank = 2;
    GeneratedExperiment exp2 = generate(s);
    ThinSvd svd2 = thin_svd(unvectorize(exp2.bayes_direction, 7, 4), 4);
    CHECK(svd2.s[2] < 1e-10 * svd2.s[0]);
    CHECK(exp2.true_mu0.norm() > 0.0);  // class -1 mean is itself a Kronecker draw

    // rank-5 extension: mu0 stays zero, mean difference rank <= 4 = min(p,m)
    s.rank = 5;
    GeneratedExperiment exp5 = generate(s);
    CHECK(exp5.true_mu0.norm() == 0.0);
}

TEST_CASE("law of large numbers: class means approach the truth") {
    Scenario s;
    s.p = 3;
    s.m = 2;
    s.n_train = 20000;
    s.n_test_per_class = 1;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.sigma_e0 = 1.0;
    s.sigma_e1 = 1.0;
    s.seed = 11;
    GeneratedExperiment exp = generate(s);
    Vector sum = Vector::Zero(6);
    int count = 0;
    for (int i = 0; i < exp.train.tensor.n(); ++i) {
        if (exp.train.labels[static_cast<std::size_t>(i)] == 1) {
            sum += exp.train.tensor.vec_sample(i);
            ++count;
        }
    }
    REQUIRE(count == 10000);
    Vector mean = sum / count;
    double bound = 4.0 * s.sigma_e1 / std::sqrt(10000.0);
    for (int c = 0; c < 6; ++c) {
        CHECK(std::abs(mean[c] - exp.true_mu1[c]) < bound);
    }
}

TEST_CASE("bayes_classify sends each mean to its own class") {
    Scenario s;
    s.p = 4;
    s.m = 3;
    s.n_train = 4;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.seed = 3;
    GeneratedExperiment exp = generate(s);
    REQUIRE(exp.bayes_direction.norm() > 0.0);
    CHECK(bayes_classify(exp, exp.true_mu1) == 1);
    CHECK(bayes_classify(exp, exp.true_mu0) == -1);

    Vector midpoint = 0.5 * (exp.true_mu0 + exp.true_mu1);
    CHECK(bayes_classify(exp, midpoint) == 1);  // tie goes to +1

    GeneratedExperiment unequal = exp;
    unequal.sigma_e1 = 2.0;
    CHECK_THROWS_AS(bayes_classify(unequal, exp.true_mu1), std::invalid_argument);
}

TEST_CASE("Monte Carlo Bayes error matches the closed form") {
    Scenario s;
    s.p = 5;
    s.m = 3;
    s.n_train = 2;
    s.n_test_per_class = 10000;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.signal = s.signal.scaled(0.35);
    s.seed = 13;
    GeneratedExperiment exp = generate(s);
    int errors = 0;
    for (int i = 0; i < exp.test.tensor.n(); ++i) {
        if (bayes_classify(exp, Vector(exp.test.tensor.vec_sample(i))) !=
            exp.test.labels[static_cast<std::size_t>(i)]) {
            ++errors;
        }
    }
    double mc = static_cast<double>(errors) / exp.test.tensor.n();
    double closed_form = normal_cdf(-exp.bayes_direction.norm() / 2.0);
    CHECK(std::abs(mc - closed_form) < 0.01);
}

TEST_CASE("scenario validation") {
    Scenario s;
    s.n_train = 7;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.n_train = 8;
    s.sigma_e0 = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.sigma_e0 = 1.0;
    s.structure = TrueStructure::rank;
    s.rank = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("calibrate_signal hits the chance level trivially") {
    CalibrationResult res = calibrate_signal(4, 3, TrueStructure::full, 1, 1.0, 0.5, 3, 12);
    CHECK(res.multiplier == 0.0);
    CHECK(res.achieved_mis > 0.40);  // chance level up to replicate noise
    CHECK_THROWS_AS(calibrate_signal(4, 3, TrueStructure::full, 1, 1.0, 0.6, 3, 12),
                    std::invalid_argument);
}

TEST_CASE("misclassification decreases as the signal multiplier grows") {
    Scenario s;
    s.p = 6;
    s.m = 3;
    s.n_train = 24;
    s.n_test_per_class = 60;
    s.structure = TrueStructure::full;
    s.seed = 21;
    double previous = 1.0;
    for (double mult : {0.05, 0.4, 1.6}) {
        Scenario scaled = s;
        scaled.signal = s.signal.scaled(mult);
        double total = 0.0;
        int reps = 6;
        for (int rep = 0; rep < reps; ++rep) {
            GeneratedExperiment exp = generate_replicate(scaled, rep);
            FitOptions opts;
            opts.seed = 31 + rep;
            MultiwayModel model = fit_full(exp.train, Solver::dwd, opts);
            int errors = 0;
            for (int i = 0; i < exp.test.tensor.n(); ++i) {
                if (model.predict(exp.test.tensor.slice(i)) !=
                    exp.test.labels[static_cast<std::size_t>(i)]) {
                    ++errors;
                }
            }
            total += static_cast<double>(errors) / exp.test.tensor.n();
        }
        double mis = total / reps;
        CHECK(mis <= previous + 0.02);
        previous = mis;
    }
}

TEST_CASE("calibrated 15x4 full scenario lands near the target") {
    CalibrationResult res =
        calibrate_signal(15, 4, TrueStructure::full, 1, 1.0, 0.20, 8, 40, 77);
    CHECK(res.achieved_mis >= 0.18);
    CHECK(res.achieved_mis <= 0.22);
    CHECK(res.multiplier > 0.0);
}

TEST_CASE("run_experiment reports the oracle row and sane aggregates") {
    Scenario s;
    s.p = 8;
    s.m = 4;
    s.n_train = 20;
    s.n_test_per_class = 25;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.signal = s.signal.scaled(0.5);
    s.seed = 41;

    std::vector<ModelSpec> models;
    ModelSpec rank1;
    rank1.name = "rank1_dwd";
    rank1.opts.rank = Rank::of(1);
    models.push_back(rank1);
    ModelSpec full;
    full.name = "full_dwd";
    full.opts.rank = Rank::Full();
    models.push_back(full);

    ExperimentTable table = run_experiment(s, models, 6);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0].name == "bayes");
    CHECK(table.rows[0].mean_cor == doctest::Approx(1.0));
    CHECK(table.rows[0].n_failed == 0);

    for (const auto& row : table.rows) {
        CHECK(row.mis.size() == 6);
        CHECK(row.mean_mis >= 0.0);
        CHECK(row.mean_mis <= 0.5 + 1e-9);
        // SE definition: sample SD over replicates divided by sqrt(R)
        double mean = 0.0;
        for (double x : row.mis) mean += x;
        mean /= 6.0;
        double ss = 0.0;
        for (double x : row.mis) ss += (x - mean) * (x - mean);
        double se = std::sqrt(ss / 5.0) / std::sqrt(6.0);
        CHECK(row.se_mis == doctest::Approx(se).epsilon(1e-12));
    }

    // oracle at least as good as fitted models on average
    CHECK(table.rows[0].mean_mis <= table.rows[1].mean_mis + 0.02);

    // deterministic: same scenario and models give the identical table
    ExperimentTable again = run_experiment(s, models, 6);
    CHECK(again.rows[1].mis == table.rows[1].mis);
    CHECK(again.rows[2].cor == table.rows[2].cor);

    CHECK_THROWS_AS(run_experiment(s, models, 1), std::invalid_argument);
}

TEST_CASE("replicate results are independent of the worker count") {
    Scenario s;
    s.p = 7;
    s.m = 3;
    s.n_train = 16;
    s.n_test_per_class = 15;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.signal = s.signal.scaled(0.5);
    s.seed = 71;

    ModelSpec rank1;
    rank1.name = "rank1";
    rank1.opts.rank = Rank::of(1);
    ExperimentTable serial = run_experiment(s, {rank1}, 6, 1);
    ExperimentTable threaded = run_experiment(s, {rank1}, 6, 3);
    CHECK(serial.rows[1].mis == threaded.rows[1].mis);
    CHECK(serial.rows[1].cor == threaded.rows[1].cor);
}

TEST_CASE("adding a model never perturbs the other rows") {
    Scenario s;
    s.p = 6;
    s.m = 3;
    s.n_train = 14;
    s.n_test_per_class = 12;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.signal = s.signal.scaled(0.5);
    s.seed = 73;

    ModelSpec rank1;
    rank1.name = "rank1";
    rank1.opts.rank = Rank::of(1);
    ModelSpec full;
    full.name = "full";
    full.opts.rank = Rank::Full();

    ExperimentTable alone = run_experiment(s, {rank1}, 5);
    ExperimentTable both = run_experiment(s, {rank1, full}, 5);
    CHECK(alone.rows[0].mis == both.rows[0].mis);  // bayes row
    CHECK(alone.rows[1].mis == both.rows[1].mis);  // rank1 row untouched
    CHECK(alone.rows[1].cor == both.rows[1].cor);
}

TEST_CASE("run_experiment takes SVM correlations in absolute value") {
    Scenario s;
    s.p = 6;
    s.m = 3;
    s.n_train = 16;
    s.n_test_per_class = 10;
    s.structure = TrueStructure::rank;
    s.rank = 1;
    s.signal = s.signal.scaled(0.6);
    s.seed = 43;

    ModelSpec svm1;
    svm1.name = "rank1_svm";
    svm1.opts.solver = Solver::svm;
    svm1.opts.rank = Rank::of(1);
    ExperimentTable table = run_experiment(s, {svm1}, 5);
    for (double c : table.rows[1].cor) {
        CHECK(c >= 0.0);
    }
}
