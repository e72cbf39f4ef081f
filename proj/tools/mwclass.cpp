// mwclass: multi-way linear classification front end.
// Subcommands: fit, predict, cv, rank-select, bootstrap, simulate.
// Every run logs its fully resolved configuration (defaults and seed
// included) as one JSON line, so results are reproducible from the log.

#include "mwclass/evaluation.hpp"
#include "mwclass/io.hpp"
#include "mwclass/multiway.hpp"
#include "mwclass/parallel.hpp"
#include "mwclass/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using nlohmann::json;
using namespace mwclass;

namespace {

Solver parse_solver(const std::string& name) {
    if (name == "dwd") return Solver::dwd;
    if (name == "svm") return Solver::svm;
    throw std::runtime_error("--solver must be dwd or svm, got '" + name + "'");
}

Rank parse_rank(const std::string& text) {
    if (text == "full") return Rank::Full();
    try {
        std::size_t used = 0;
        int r = std::stoi(text, &used);
        if (used == text.size() && r >= 1) return Rank::of(r);
    } catch (const std::exception&) {
    }
    throw std::runtime_error("--rank must be a positive integer or 'full', got '" + text + "'");
}

std::string rank_to_string(const Rank& rank) {
    return rank.full ? "full" : std::to_string(rank.r);
}

// shared fit flags
struct FitFlags {
    std::string solver = "dwd";
    std::string rank = "1";
    double epsilon = 1e-5;
    int max_iter = 100;
    int restarts = 0;
    std::uint64_t seed = 0;
    bool standardize = false;
    double svm_lambda = 0.0;
    int workers = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--solver", solver, "Inner solver: dwd or svm")->capture_default_str();
        cmd->add_option("--rank", rank, "Model rank: positive integer or 'full'")
            ->capture_default_str();
        cmd->add_option("--epsilon", epsilon, "Convergence threshold on normalized vec(B)")
            ->capture_default_str();
        cmd->add_option("--max-iter", max_iter, "Maximum alternating iterations")
            ->capture_default_str();
        cmd->add_option("--restarts", restarts, "Random restarts (0 = solver default)")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
        cmd->add_flag("--standardize", standardize,
                      "Z-score each (dim1, dim2) cell on training data");
        cmd->add_option("--svm-lambda", svm_lambda, "SVM ridge penalty (0 = 1/n)")
            ->capture_default_str();
        cmd->add_option("--workers", workers, "Worker threads (0 = MWCLASS_WORKERS or hardware)")
            ->capture_default_str();
    }

    FitOptions to_options() const {
        FitOptions opts;
        opts.solver = parse_solver(solver);
        opts.rank = parse_rank(rank);
        opts.epsilon = epsilon;
        opts.max_acs_iterations = max_iter;
        opts.restarts = restarts;
        opts.seed = seed;
        opts.standardize = standardize;
        opts.svm.lambda = svm_lambda;
        return opts;
    }

    json to_json() const {
        return json{{"solver", solver},
                    {"rank", rank},
                    {"epsilon", epsilon},
                    {"max_iter", max_iter},
                    {"restarts", restarts},
                    {"seed", seed},
                    {"standardize", standardize},
                    {"svm_lambda", svm_lambda},
                    {"workers", resolve_workers(workers)}};
    }
};

void log_config(const std::string& command, json config) {
    config["command"] = command;
    std::cout << "config: " << config.dump() << "\n";
}

void check_axis_names(const MultiwayModel& model, const TensorData& tensor) {
    if (tensor.tensor.p() != model.b.rows() || tensor.tensor.m() != model.b.cols()) {
        throw std::runtime_error("axis mismatch: tensor is " + std::to_string(tensor.tensor.p()) +
                                 "x" + std::to_string(tensor.tensor.m()) +
                                 " but the model expects " + std::to_string(model.b.rows()) + "x" +
                                 std::to_string(model.b.cols()));
    }
    if (!model.dim1_names.empty() && !tensor.dim1_names.empty() &&
        model.dim1_names != tensor.dim1_names) {
        throw std::runtime_error("axis mismatch: dim1 names differ from the model's training data");
    }
    if (!model.dim2_names.empty() && !tensor.dim2_names.empty() &&
        model.dim2_names != tensor.dim2_names) {
        throw std::runtime_error("axis mismatch: dim2 names differ from the model's training data");
    }
}

std::pair<std::string, std::string> split_two_paths(const std::string& out) {
    auto comma = out.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= out.size()) {
        throw std::runtime_error(
            "--out for cv needs two comma-separated paths: report.json,scores.csv");
    }
    return {out.substr(0, comma), out.substr(comma + 1)};
}

std::vector<Rank> parse_rank_list(const std::string& text) {
    std::vector<Rank> ranks;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        std::string token =
            comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
        if (!token.empty()) ranks.push_back(parse_rank(token));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (ranks.empty()) throw std::runtime_error("--ranks must list at least one rank");
    return ranks;
}

struct ScenarioSpec {
    Scenario scenario;
    std::optional<double> calibrate_target;
    int calibrate_reps = 20;
};

ScenarioSpec parse_structure_token(ScenarioSpec spec, const std::string& token) {
    if (token == "full") {
        spec.scenario.structure = TrueStructure::full;
    } else if (token.rfind("rank", 0) == 0) {
        spec.scenario.structure = TrueStructure::rank;
        spec.scenario.rank = std::stoi(token.substr(4));
    } else {
        throw std::runtime_error("unknown structure '" + token + "' (use full or rank<k>)");
    }
    return spec;
}

// named presets: table1_<p>x<m>_<truth>, calibrated to 20% full-model error
std::optional<ScenarioSpec> named_scenario(const std::string& name) {
    if (name.rfind("table1_", 0) != 0) return std::nullopt;
    std::string rest = name.substr(7);
    auto underscore = rest.find('_');
    if (underscore == std::string::npos) return std::nullopt;
    std::string dims = rest.substr(0, underscore);
    std::string truth = rest.substr(underscore + 1);
    auto x = dims.find('x');
    if (x == std::string::npos) return std::nullopt;

    ScenarioSpec spec;
    spec.scenario.p = std::stoi(dims.substr(0, x));
    spec.scenario.m = std::stoi(dims.substr(x + 1));
    spec.scenario.n_train = 40;
    spec.scenario.n_test_per_class = 50;
    spec.scenario.seed = 20240;
    spec.calibrate_target = 0.20;
    return parse_structure_token(spec, truth);
}

ScenarioSpec scenario_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open scenario file");
    ScenarioSpec spec;
    double signal_scale = 1.0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ": expected key=value at line " +
                                     std::to_string(line_no));
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "p") spec.scenario.p = std::stoi(value);
        else if (key == "m") spec.scenario.m = std::stoi(value);
        else if (key == "n_train") spec.scenario.n_train = std::stoi(value);
        else if (key == "n_test_per_class") spec.scenario.n_test_per_class = std::stoi(value);
        else if (key == "structure") spec = parse_structure_token(spec, value);
        else if (key == "sigma_e") spec.scenario.sigma_e0 = spec.scenario.sigma_e1 = std::stod(value);
        else if (key == "signal_scale") signal_scale = std::stod(value);
        else if (key == "calibrate_target") spec.calibrate_target = std::stod(value);
        else if (key == "calibrate_reps") spec.calibrate_reps = std::stoi(value);
        else if (key == "seed") spec.scenario.seed = std::stoull(value);
        else throw std::runtime_error(path + ": unknown key '" + key + "'");
    }
    spec.scenario.signal = spec.scenario.signal.scaled(signal_scale);
    return spec;
}

std::vector<ModelSpec> parse_models(const std::string& text) {
    std::vector<ModelSpec> models;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        std::string token =
            comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
        if (!token.empty()) {
            ModelSpec spec;
            spec.name = token;
            std::string rank_part = token;
            if (token.rfind("svm_", 0) == 0) {
                spec.opts.solver = Solver::svm;
                rank_part = token.substr(4);
            } else if (token.rfind("dwd_", 0) == 0) {
                rank_part = token.substr(4);
            }
            if (rank_part == "full") {
                spec.opts.rank = Rank::Full();
            } else if (rank_part.rfind("rank", 0) == 0) {
                spec.opts.rank = Rank::of(std::stoi(rank_part.substr(4)));
            } else {
                throw std::runtime_error("unknown model '" + token +
                                         "' (use [svm_]rank<k> or [svm_]full)");
            }
            models.push_back(std::move(spec));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (models.empty()) throw std::runtime_error("--models must list at least one model");
    return models;
}

int cmd_fit(const std::string& tensor_path, const std::string& labels_path, const FitFlags& flags,
            const std::string& out_path) {
    FitOptions opts = flags.to_options();
    json config = flags.to_json();
    config["tensor"] = tensor_path;
    config["labels"] = labels_path;
    config["out"] = out_path;
    log_config("fit", config);

    IngestResult ingested = ingest(tensor_path, labels_path);
    MultiwayModel model = fit(ingested.data, opts);
    save_model(out_path, model, opts);
    std::cout << "fit: rank=" << rank_to_string(model.rank)
              << " converged=" << (model.fit_trace.converged ? "true" : "false")
              << " iterations=" << model.fit_trace.iterations
              << " beta=" << format_real(model.beta) << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& tensor_path,
                const std::string& out_path) {
    log_config("predict", json{{"model", model_path}, {"tensor", tensor_path}, {"out", out_path}});
    LoadedModel loaded = load_model(model_path);
    TensorData tensor = read_tensor_csv(tensor_path);
    check_axis_names(loaded.model, tensor);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(out_path + ": cannot open file for writing");
    out << "sample_id,score,label\n";
    for (int i = 0; i < tensor.tensor.n(); ++i) {
        double score = loaded.model.score(tensor.tensor.slice(i));
        int label = score >= 0.0 ? 1 : -1;
        out << csv_escape(tensor.sample_ids[static_cast<std::size_t>(i)]) << ','
            << format_real(score) << ',' << label << '\n';
    }
    std::cout << "predict: scored " << tensor.tensor.n() << " samples\n";
    return 0;
}

int cmd_cv(const std::string& tensor_path, const std::string& labels_path, const FitFlags& flags,
           const std::string& out_paths) {
    auto [report_path, scores_path] = split_two_paths(out_paths);
    FitOptions opts = flags.to_options();
    json config = flags.to_json();
    config["tensor"] = tensor_path;
    config["labels"] = labels_path;
    config["out"] = out_paths;
    log_config("cv", config);

    IngestResult ingested = ingest(tensor_path, labels_path);
    EvalReport report = loocv(ingested.data, opts, flags.workers);

    int converged_folds = 0;
    for (bool c : report.per_fold_converged)
        if (c) ++converged_folds;
    json summary{{"misclassification_rate", report.misclassification_rate},
                 {"t_statistic", report.t_statistic},
                 {"n", ingested.data.tensor.n()},
                 {"n_failed_folds", report.n_failed_folds},
                 {"converged_folds", converged_folds},
                 {"options", flags.to_json()}};
    std::ofstream rep(report_path);
    if (!rep) throw std::runtime_error(report_path + ": cannot open file for writing");
    rep << summary.dump(2) << '\n';

    std::ofstream scores(scores_path);
    if (!scores) throw std::runtime_error(scores_path + ": cannot open file for writing");
    scores << "sample_id,label,score,correct\n";
    for (int i = 0; i < ingested.data.tensor.n(); ++i) {
        double s = report.per_sample_scores[static_cast<std::size_t>(i)];
        int y = ingested.data.labels[static_cast<std::size_t>(i)];
        int predicted = s >= 0.0 ? 1 : -1;
        bool failed = report.per_fold_failed[static_cast<std::size_t>(i)];
        scores << csv_escape(ingested.sample_ids[static_cast<std::size_t>(i)]) << ',' << y << ','
               << format_real(s) << ',' << (failed ? 0 : (predicted == y ? 1 : 0)) << '\n';
    }
    std::cout << "cv: mis=" << format_real(report.misclassification_rate)
              << " t=" << format_real(report.t_statistic) << "\n";
    return 0;
}

int cmd_rank_select(const std::string& tensor_path, const std::string& labels_path,
                    const std::string& ranks_text, const FitFlags& flags,
                    const std::string& out_path) {
    std::vector<Rank> ranks = parse_rank_list(ranks_text);
    FitOptions opts = flags.to_options();
    json config = flags.to_json();
    config["tensor"] = tensor_path;
    config["labels"] = labels_path;
    config["ranks"] = ranks_text;
    config["out"] = out_path;
    log_config("rank-select", config);

    IngestResult ingested = ingest(tensor_path, labels_path);
    std::string note = rank_selection_note(ingested.data.tensor.n(), ingested.data.tensor.p(),
                                           ingested.data.tensor.m());
    if (!note.empty()) std::cout << note << "\n";

    auto rows = rank_selection(ingested.data, opts.solver, ranks, opts, flags.workers);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(out_path + ": cannot open file for writing");
    out << "rank,misclassification,t_statistic,selected\n";
    for (const auto& row : rows) {
        out << rank_to_string(row.rank) << ',' << format_real(row.misclassification) << ','
            << format_real(row.t) << ',' << (row.selected ? 1 : 0) << '\n';
    }
    for (const auto& row : rows) {
        if (row.selected) {
            std::cout << "rank-select: best rank=" << rank_to_string(row.rank)
                      << " mis=" << format_real(row.misclassification) << "\n";
        }
    }
    return 0;
}

int cmd_bootstrap(const std::string& tensor_path, const std::string& labels_path, int n_boot,
                  const FitFlags& flags, const std::string& out_path) {
    FitOptions opts = flags.to_options();
    json config = flags.to_json();
    config["tensor"] = tensor_path;
    config["labels"] = labels_path;
    config["n_boot"] = n_boot;
    config["out"] = out_path;
    log_config("bootstrap", config);

    IngestResult ingested = ingest(tensor_path, labels_path);
    BootstrapReport report = bootstrap_weights(ingested.data, opts, n_boot, flags.workers);

    auto name_of = [](const std::vector<std::string>& names, int idx) {
        return names.empty() ? std::to_string(idx + 1) : names[static_cast<std::size_t>(idx)];
    };
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(out_path + ": cannot open file for writing");
    out << "factor,index,name,component,estimate,lower95,upper95\n";
    for (int z = 0; z < report.w_point.cols(); ++z) {
        for (int j = 0; j < report.w_point.rows(); ++j) {
            out << "dim1," << j + 1 << ',' << csv_escape(name_of(ingested.data.dim1_names, j))
                << ',' << z + 1 << ',' << format_real(report.w_point(j, z)) << ','
                << format_real(report.w_lower(j, z)) << ',' << format_real(report.w_upper(j, z))
                << '\n';
        }
        for (int k = 0; k < report.v_point.rows(); ++k) {
            out << "dim2," << k + 1 << ',' << csv_escape(name_of(ingested.data.dim2_names, k))
                << ',' << z + 1 << ',' << format_real(report.v_point(k, z)) << ','
                << format_real(report.v_lower(k, z)) << ',' << format_real(report.v_upper(k, z))
                << '\n';
        }
    }
    std::cout << "bootstrap: n_boot=" << n_boot << " failed=" << report.n_failed << "\n";
    return 0;
}

int cmd_simulate(const std::string& scenario_text, int reps, const std::string& models_text,
                 std::uint64_t seed_override, bool seed_given, int workers,
                 const std::string& out_path) {
    ScenarioSpec spec;
    if (auto preset = named_scenario(scenario_text)) {
        spec = *preset;
    } else {
        spec = scenario_from_file(scenario_text);
    }
    if (seed_given) spec.scenario.seed = seed_override;
    std::vector<ModelSpec> models = parse_models(models_text);

    json config{{"scenario", scenario_text},
                {"reps", reps},
                {"models", models_text},
                {"seed", spec.scenario.seed},
                {"p", spec.scenario.p},
                {"m", spec.scenario.m},
                {"n_train", spec.scenario.n_train},
                {"workers", resolve_workers(workers)}};
    if (spec.calibrate_target) config["calibrate_target"] = *spec.calibrate_target;
    log_config("simulate", config);

    if (spec.calibrate_target) {
        CalibrationResult cal = calibrate_signal(
            spec.scenario.p, spec.scenario.m, spec.scenario.structure, spec.scenario.rank,
            spec.scenario.sigma_e0, *spec.calibrate_target, spec.calibrate_reps,
            spec.scenario.n_train, spec.scenario.seed, workers);
        spec.scenario.signal = cal.signal;
        std::cout << "calibration: multiplier=" << format_real(cal.multiplier)
                  << " achieved_full_mis=" << format_real(cal.achieved_mis) << "\n";
    }

    ExperimentTable table = run_experiment(spec.scenario, models, reps, workers);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(out_path + ": cannot open file for writing");
    out << "model,mis,se_mis,cor,se_cor,n_failed\n";
    for (const auto& row : table.rows) {
        out << csv_escape(row.name) << ',' << format_real(row.mean_mis) << ','
            << format_real(row.se_mis) << ',' << format_real(row.mean_cor) << ','
            << format_real(row.se_cor) << ',' << row.n_failed << '\n';
    }
    std::cout << "simulate: " << table.rows.size() << " model rows over " << reps
              << " replicates\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-way linear classification (DWD/SVM with low-rank coefficients)"};
    app.require_subcommand(1);

    std::string tensor_path, labels_path, out_path, model_path, ranks_text;
    std::string scenario_text, models_text = "rank1,full";
    int n_boot = 5000, reps = 100;
    std::uint64_t sim_seed = 0;
    int sim_workers = 0;
    FitFlags flags;

    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a multi-way model and write model JSON");
    fit_cmd->add_option("--tensor", tensor_path, "Long-format tensor CSV")->required();
    fit_cmd->add_option("--labels", labels_path, "Labels CSV")->required();
    fit_cmd->add_option("--out", out_path, "Output model JSON path")->required();
    flags.attach(fit_cmd);

    CLI::App* predict_cmd = app.add_subcommand("predict", "Score new samples with a saved model");
    predict_cmd->add_option("--model", model_path, "Model JSON path")->required();
    predict_cmd->add_option("--tensor", tensor_path, "Long-format tensor CSV")->required();
    predict_cmd->add_option("--out", out_path, "Output scores CSV path")->required();

    CLI::App* cv_cmd = app.add_subcommand("cv", "Leave-one-out cross-validation");
    cv_cmd->add_option("--tensor", tensor_path, "Long-format tensor CSV")->required();
    cv_cmd->add_option("--labels", labels_path, "Labels CSV")->required();
    cv_cmd->add_option("--out", out_path, "report.json,scores.csv")->required();
    flags.attach(cv_cmd);

    CLI::App* rank_cmd = app.add_subcommand("rank-select", "Compare ranks by LOOCV");
    rank_cmd->add_option("--tensor", tensor_path, "Long-format tensor CSV")->required();
    rank_cmd->add_option("--labels", labels_path, "Labels CSV")->required();
    rank_cmd->add_option("--ranks", ranks_text, "Comma list, e.g. 1,2,3,full")->required();
    rank_cmd->add_option("--out", out_path, "Output table CSV path")->required();
    flags.attach(rank_cmd);

    CLI::App* boot_cmd = app.add_subcommand("bootstrap", "Stratified bootstrap factor intervals");
    boot_cmd->add_option("--tensor", tensor_path, "Long-format tensor CSV")->required();
    boot_cmd->add_option("--labels", labels_path, "Labels CSV")->required();
    boot_cmd->add_option("--n-boot", n_boot, "Bootstrap resamples")->capture_default_str();
    boot_cmd->add_option("--out", out_path, "Output intervals CSV path")->required();
    flags.attach(boot_cmd);

    CLI::App* sim_cmd = app.add_subcommand("simulate", "Replicated generative comparison");
    sim_cmd->add_option("--scenario", scenario_text,
                        "Preset name (table1_15x4_rank1) or config file")
        ->required();
    sim_cmd->add_option("--reps", reps, "Number of replicates")->capture_default_str();
    sim_cmd->add_option("--models", models_text, "Comma list: [svm_]rank<k>, [svm_]full")
        ->capture_default_str();
    CLI::Option* seed_opt = sim_cmd->add_option("--seed", sim_seed, "Override scenario seed");
    sim_cmd->add_option("--workers", sim_workers, "Worker threads")->capture_default_str();
    sim_cmd->add_option("--out", out_path, "Output table CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit_cmd->parsed()) return cmd_fit(tensor_path, labels_path, flags, out_path);
        if (predict_cmd->parsed()) return cmd_predict(model_path, tensor_path, out_path);
        if (cv_cmd->parsed()) return cmd_cv(tensor_path, labels_path, flags, out_path);
        if (rank_cmd->parsed())
            return cmd_rank_select(tensor_path, labels_path, ranks_text, flags, out_path);
        if (boot_cmd->parsed())
            return cmd_bootstrap(tensor_path, labels_path, n_boot, flags, out_path);
        if (sim_cmd->parsed())
            return cmd_simulate(scenario_text, reps, models_text, sim_seed, seed_opt->count() > 0,
                                sim_workers, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
