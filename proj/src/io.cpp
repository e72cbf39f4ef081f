#include "mwclass/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

using nlohmann::json;

namespace mwclass {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<std::string> parse_csv_line(const std::string& line, const std::string& path,
                                        std::size_t row) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    while (i < line.size()) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += ch;
        }
        ++i;
    }
    if (quoted) fail(path + ": unterminated quote at row " + std::to_string(row));
    fields.push_back(field);
    return fields;
}

std::string trim_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path + ": cannot open file");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        line = trim_cr(line);
        if (line.empty() && in.peek() == EOF) break;
        rows.push_back(parse_csv_line(line, path, row));
    }
    if (rows.empty()) fail(path + ": file is empty");
    return rows;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

TensorData read_tensor_csv(const std::string& path) {
    auto rows = read_csv(path);
    const auto& header = rows[0];
    if (header.size() != 4 || header[0] != "sample_id" || header[1] != "dim1" ||
        header[2] != "dim2" || header[3] != "value") {
        fail(path + ": header must be sample_id,dim1,dim2,value");
    }

    std::vector<std::string> samples, dim1s, dim2s;
    std::map<std::string, int> sample_index, dim1_index, dim2_index;
    auto level_of = [](const std::string& name, std::vector<std::string>& order,
                       std::map<std::string, int>& index) {
        auto it = index.find(name);
        if (it != index.end()) return it->second;
        int id = static_cast<int>(order.size());
        order.push_back(name);
        index.emplace(name, id);
        return id;
    };

    struct Cell {
        int i, j, k;
        double value;
    };
    std::vector<Cell> cells;
    cells.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 4) {
            fail(path + ": expected 4 fields at row " + std::to_string(r + 1));
        }
        int i = level_of(row[0], samples, sample_index);
        int j = level_of(row[1], dim1s, dim1_index);
        int k = level_of(row[2], dim2s, dim2_index);
        char* end = nullptr;
        double value = std::strtod(row[3].c_str(), &end);
        if (row[3].empty() || end != row[3].c_str() + row[3].size() || !std::isfinite(value)) {
            fail(path + ": non-numeric value '" + row[3] + "' at row " + std::to_string(r + 1));
        }
        cells.push_back(Cell{i, j, k, value});
    }

    const int n = static_cast<int>(samples.size());
    const int p = static_cast<int>(dim1s.size());
    const int m = static_cast<int>(dim2s.size());
    Tensor3 tensor(n, p, m);
    std::vector<bool> seen(static_cast<std::size_t>(n) * p * m, false);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        std::size_t flat = (static_cast<std::size_t>(cell.i) * m + cell.k) * p + cell.j;
        if (seen[flat]) {
            fail(path + ": duplicate cell (" + samples[static_cast<std::size_t>(cell.i)] + ", " +
                 dim1s[static_cast<std::size_t>(cell.j)] + ", " +
                 dim2s[static_cast<std::size_t>(cell.k)] + ")");
        }
        seen[flat] = true;
        tensor(cell.i, cell.j, cell.k) = cell.value;
    }

    std::vector<std::string> gaps;
    for (int i = 0; i < n && gaps.size() < 10; ++i) {
        for (int j = 0; j < p && gaps.size() < 10; ++j) {
            for (int k = 0; k < m && gaps.size() < 10; ++k) {
                std::size_t flat = (static_cast<std::size_t>(i) * m + k) * p + j;
                if (!seen[flat]) {
                    gaps.push_back("(" + samples[static_cast<std::size_t>(i)] + ", " +
                                   dim1s[static_cast<std::size_t>(j)] + ", " +
                                   dim2s[static_cast<std::size_t>(k)] + ")");
                }
            }
        }
    }
    if (!gaps.empty()) {
        std::string msg = path + ": incomplete grid; missing cells:";
        for (const auto& g : gaps) msg += " " + g;
        fail(msg);
    }

    return TensorData{std::move(tensor), std::move(samples), std::move(dim1s), std::move(dim2s)};
}

std::vector<std::pair<std::string, int>> read_labels_csv(const std::string& path) {
    auto rows = read_csv(path);
    const auto& header = rows[0];
    if (header.size() != 2 || header[0] != "sample_id" || header[1] != "label") {
        fail(path + ": header must be sample_id,label");
    }
    bool saw_zero = false, saw_minus = false;
    std::vector<std::pair<std::string, int>> raw;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 2) fail(path + ": expected 2 fields at row " + std::to_string(r + 1));
        int value;
        if (row[1] == "-1") {
            value = -1;
            saw_minus = true;
        } else if (row[1] == "0") {
            value = 0;
            saw_zero = true;
        } else if (row[1] == "1" || row[1] == "+1") {
            value = 1;
        } else {
            fail(path + ": label must be -1, +1, 0, or 1; got '" + row[1] + "' at row " +
                 std::to_string(r + 1));
        }
        raw.emplace_back(row[0], value);
    }
    if (saw_zero && saw_minus) {
        fail(path + ": labels mix the 0/1 and -1/+1 conventions");
    }
    for (auto& [id, value] : raw) {
        if (value == 0) value = -1;
    }
    return raw;
}

IngestResult ingest(const std::string& tensor_path, const std::string& labels_path) {
    TensorData td = read_tensor_csv(tensor_path);
    auto labels_raw = read_labels_csv(labels_path);

    std::map<std::string, int> sample_index;
    for (std::size_t i = 0; i < td.sample_ids.size(); ++i) {
        sample_index.emplace(td.sample_ids[i], static_cast<int>(i));
    }
    std::vector<int> labels(td.sample_ids.size(), 0);
    std::vector<bool> assigned(td.sample_ids.size(), false);
    for (const auto& [id, value] : labels_raw) {
        auto it = sample_index.find(id);
        if (it == sample_index.end()) {
            fail(labels_path + ": unknown sample '" + id + "' not present in tensor file");
        }
        if (assigned[static_cast<std::size_t>(it->second)]) {
            fail(labels_path + ": duplicate label for sample '" + id + "'");
        }
        assigned[static_cast<std::size_t>(it->second)] = true;
        labels[static_cast<std::size_t>(it->second)] = value;
    }
    for (std::size_t i = 0; i < assigned.size(); ++i) {
        if (!assigned[i]) fail(labels_path + ": no label for sample '" + td.sample_ids[i] + "'");
    }

    LabeledDataset data{std::move(td.tensor), std::move(labels), std::move(td.dim1_names),
                        std::move(td.dim2_names)};
    data.validate();
    return IngestResult{std::move(data), std::move(td.sample_ids)};
}

void write_tensor_csv(const std::string& path, const TensorData& data) {
    std::ofstream out(path);
    if (!out) fail(path + ": cannot open file for writing");
    out << "sample_id,dim1,dim2,value\n";
    for (int i = 0; i < data.tensor.n(); ++i) {
        for (int k = 0; k < data.tensor.m(); ++k) {
            for (int j = 0; j < data.tensor.p(); ++j) {
                out << csv_escape(data.sample_ids[static_cast<std::size_t>(i)]) << ','
                    << csv_escape(data.dim1_names[static_cast<std::size_t>(j)]) << ','
                    << csv_escape(data.dim2_names[static_cast<std::size_t>(k)]) << ','
                    << format_real(data.tensor(i, j, k)) << '\n';
            }
        }
    }
}

namespace {

json matrix_to_json(const Matrix& x) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < x.cols(); ++j) row.push_back(x(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty()) fail("model file: expected a matrix");
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows[0].size());
    Matrix x(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
            fail("model file: ragged matrix rows");
        }
        for (Eigen::Index j = 0; j < c; ++j) {
            x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
        }
    }
    return x;
}

}  // namespace

void save_model(const std::string& path, const MultiwayModel& model, const FitOptions& opts) {
    json doc;
    doc["schema_version"] = 1;
    doc["solver"] = model.solver == Solver::dwd ? "dwd" : "svm";
    if (model.rank.full) doc["rank"] = "full";
    else doc["rank"] = model.rank.r;
    doc["p"] = model.b.rows();
    doc["m"] = model.b.cols();
    doc["beta"] = model.beta;
    if (model.rank.full) {
        doc["b"] = matrix_to_json(model.b);
    } else {
        doc["w"] = matrix_to_json(model.w);
        doc["v"] = matrix_to_json(model.v);
    }
    if (!model.dim1_names.empty()) doc["dim1_names"] = model.dim1_names;
    if (!model.dim2_names.empty()) doc["dim2_names"] = model.dim2_names;
    if (model.standardizer) {
        doc["standardizer"] = {{"mean", matrix_to_json(model.standardizer->mean)},
                               {"sd", matrix_to_json(model.standardizer->sd)}};
    }
    doc["options"] = {{"epsilon", opts.epsilon},
                      {"max_acs_iterations", opts.max_acs_iterations},
                      {"restarts", opts.restarts},
                      {"seed", opts.seed},
                      {"standardize", opts.standardize},
                      {"dwd_tolerance", opts.dwd.tolerance},
                      {"dwd_max_iterations", opts.dwd.max_iterations},
                      {"svm_lambda", opts.svm.lambda},
                      {"svm_tolerance", opts.svm.tolerance},
                      {"svm_max_iterations", opts.svm.max_iterations}};
    doc["fit_trace"] = {{"iterations", model.fit_trace.iterations},
                        {"converged", model.fit_trace.converged},
                        {"final_delta",
                         model.fit_trace.delta_b.empty() ? 0.0 : model.fit_trace.delta_b.back()},
                        {"restarts_run", model.fit_trace.restarts_run},
                        {"best_restart", model.fit_trace.best_restart},
                        {"penalty_fallback", model.fit_trace.penalty_fallback},
                        {"final_inner_objective", model.fit_trace.final_inner_objective}};

    std::ofstream out(path);
    if (!out) fail(path + ": cannot open file for writing");
    out << doc.dump(2) << '\n';
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path + ": cannot open file");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        fail(path + ": invalid JSON: " + e.what());
    }
    if (doc.value("schema_version", 0) != 1) {
        fail(path + ": unsupported schema_version");
    }

    LoadedModel loaded;
    MultiwayModel& model = loaded.model;
    std::string solver = doc.at("solver").get<std::string>();
    if (solver == "dwd") model.solver = Solver::dwd;
    else if (solver == "svm") model.solver = Solver::svm;
    else fail(path + ": unknown solver '" + solver + "'");

    model.beta = doc.at("beta").get<double>();
    if (doc.at("rank").is_string()) {
        model.rank = Rank::Full();
        model.b = matrix_from_json(doc.at("b"));
    } else {
        model.rank = Rank::of(doc.at("rank").get<int>());
        model.w = matrix_from_json(doc.at("w"));
        model.v = matrix_from_json(doc.at("v"));
        model.b = model.w * model.v.transpose();
    }
    if (doc.contains("dim1_names")) model.dim1_names = doc["dim1_names"].get<std::vector<std::string>>();
    if (doc.contains("dim2_names")) model.dim2_names = doc["dim2_names"].get<std::vector<std::string>>();
    if (doc.contains("standardizer")) {
        Standardizer st;
        st.mean = matrix_from_json(doc["standardizer"]["mean"]);
        st.sd = matrix_from_json(doc["standardizer"]["sd"]);
        model.standardizer = std::move(st);
    }

    const json& options = doc.at("options");
    FitOptions& opts = loaded.opts;
    opts.solver = model.solver;
    opts.rank = model.rank;
    opts.epsilon = options.at("epsilon").get<double>();
    opts.max_acs_iterations = options.at("max_acs_iterations").get<int>();
    opts.restarts = options.at("restarts").get<int>();
    opts.seed = options.at("seed").get<std::uint64_t>();
    opts.standardize = options.at("standardize").get<bool>();
    opts.dwd.tolerance = options.at("dwd_tolerance").get<double>();
    opts.dwd.max_iterations = options.at("dwd_max_iterations").get<int>();
    opts.svm.lambda = options.at("svm_lambda").get<double>();
    opts.svm.tolerance = options.at("svm_tolerance").get<double>();
    opts.svm.max_iterations = options.at("svm_max_iterations").get<int>();

    const json& trace = doc.at("fit_trace");
    model.fit_trace.iterations = trace.at("iterations").get<int>();
    model.fit_trace.converged = trace.at("converged").get<bool>();
    model.fit_trace.restarts_run = trace.at("restarts_run").get<int>();
    model.fit_trace.best_restart = trace.at("best_restart").get<int>();
    model.fit_trace.penalty_fallback = trace.at("penalty_fallback").get<bool>();
    model.fit_trace.final_inner_objective = trace.at("final_inner_objective").get<double>();
    if (trace.contains("final_delta")) {
        model.fit_trace.delta_b = {trace["final_delta"].get<double>()};
    }
    return loaded;
}

}  // namespace mwclass
