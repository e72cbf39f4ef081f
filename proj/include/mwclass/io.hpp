#pragma once

#include "mwclass/multiway.hpp"
#include "mwclass/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mwclass {

// Long-format tensor file contents: one row per (sample, dim1, dim2) cell.
struct TensorData {
    Tensor3 tensor;
    std::vector<std::string> sample_ids;
    std::vector<std::string> dim1_names;
    std::vector<std::string> dim2_names;
};

// Reads a long-format CSV with header sample_id,dim1,dim2,value.  Level
// order is first appearance in the file.  Duplicate cells, incomplete grids,
// and non-numeric values are reported with row numbers.
TensorData read_tensor_csv(const std::string& path);

// Reads a labels CSV with header sample_id,label.  Labels may be -1/+1 or
// 0/1 (mapped to -1/+1); mixing the two conventions is an error.
std::vector<std::pair<std::string, int>> read_labels_csv(const std::string& path);

struct IngestResult {
    LabeledDataset data;
    std::vector<std::string> sample_ids;
};

IngestResult ingest(const std::string& tensor_path, const std::string& labels_path);

// Canonical export: sample-major rows, dim2 outer, dim1 inner (the
// vectorization order), reals with 17 significant digits.
void write_tensor_csv(const std::string& path, const TensorData& data);

void save_model(const std::string& path, const MultiwayModel& model, const FitOptions& opts);

struct LoadedModel {
    MultiwayModel model;
    FitOptions opts;
};

LoadedModel load_model(const std::string& path);

// %.17g formatting shared by all CSV emitters.
std::string format_real(double x);

// Minimal RFC4180-style CSV helpers.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
std::string csv_escape(const std::string& field);

}  // namespace mwclass
