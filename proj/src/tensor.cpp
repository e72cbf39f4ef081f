#include "mwclass/tensor.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace mwclass {

namespace {

void check_dims(int n, int p, int m) {
    if (n < 1 || p < 1 || m < 1) {
        throw std::invalid_argument("Tensor3: dimensions must satisfy n, p, m >= 1");
    }
}

}  // namespace

Tensor3::Tensor3(int n, int p, int m) : n_(n), p_(p), m_(m) {
    check_dims(n, p, m);
    values_.assign(static_cast<std::size_t>(n) * p * m, 0.0);
}

Tensor3::Tensor3(int n, int p, int m, std::vector<double> values)
    : n_(n), p_(p), m_(m), values_(std::move(values)) {
    check_dims(n, p, m);
    if (values_.size() != static_cast<std::size_t>(n) * p * m) {
        throw std::invalid_argument("Tensor3: stored length must equal n*p*m");
    }
    for (double x : values_) {
        if (!std::isfinite(x)) throw std::invalid_argument("Tensor3: entries must be finite");
    }
}

void LabeledDataset::validate() const {
    if (labels.size() != static_cast<std::size_t>(tensor.n())) {
        throw std::invalid_argument("LabeledDataset: labels length must equal sample count");
    }
    for (int y : labels) {
        if (y != -1 && y != 1) throw std::invalid_argument("LabeledDataset: labels must be -1 or +1");
    }
    if (!dim1_names.empty() && dim1_names.size() != static_cast<std::size_t>(tensor.p())) {
        throw std::invalid_argument("LabeledDataset: dim1_names length must equal p");
    }
    if (!dim2_names.empty() && dim2_names.size() != static_cast<std::size_t>(tensor.m())) {
        throw std::invalid_argument("LabeledDataset: dim2_names length must equal m");
    }
    for (double x : tensor.values()) {
        if (!std::isfinite(x)) throw std::invalid_argument("LabeledDataset: tensor entries must be finite");
    }
}

void LabeledDataset::validate_for_fit() const {
    validate();
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else has_neg = true;
    }
    if (!has_pos || !has_neg) {
        throw std::invalid_argument("LabeledDataset: both classes must be present");
    }
}

Matrix mode2_product(const Tensor3& x, const Vector& v) {
    if (v.size() != x.m()) {
        throw std::invalid_argument("mode2_product: v length must equal m");
    }
    if (!v.allFinite()) throw std::invalid_argument("mode2_product: v must be finite");
    Matrix out(x.n(), x.p());
    for (int i = 0; i < x.n(); ++i) {
        out.row(i) = (x.slice(i) * v).transpose();
    }
    return out;
}

Matrix mode1_product(const Tensor3& x, const Vector& w) {
    if (w.size() != x.p()) {
        throw std::invalid_argument("mode1_product: w length must equal p");
    }
    if (!w.allFinite()) throw std::invalid_argument("mode1_product: w must be finite");
    Matrix out(x.n(), x.m());
    for (int i = 0; i < x.n(); ++i) {
        out.row(i) = (x.slice(i).transpose() * w).transpose();
    }
    return out;
}

Vector vectorize(const Matrix& b) {
    return Eigen::Map<const Vector>(b.data(), b.size());
}

Matrix unvectorize(const Vector& b, int p, int m) {
    if (b.size() != static_cast<Eigen::Index>(p) * m) {
        throw std::invalid_argument("unvectorize: vector length must equal p*m");
    }
    return Eigen::Map<const Matrix>(b.data(), p, m);
}

Vector kron(const Vector& v, const Vector& w) {
    Vector out(v.size() * w.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        out.segment(k * w.size(), w.size()) = v[k] * w;
    }
    return out;
}

ThinSvd thin_svd(const Matrix& b, int r) {
    const int rank_cap = static_cast<int>(std::min(b.rows(), b.cols()));
    if (r < 1 || r > rank_cap) {
        throw std::invalid_argument("thin_svd: rank must satisfy 1 <= r <= min(p, m)");
    }
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ThinSvd out;
    out.u = svd.matrixU().leftCols(r);
    out.s = svd.singularValues().head(r);
    out.v = svd.matrixV().leftCols(r);
    for (int z = 0; z < r; ++z) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index k = 0; k < out.v.rows(); ++k) {
            double mag = std::abs(out.v(k, z));
            if (mag > best) {
                best = mag;
                arg = k;
            }
        }
        if (out.v(arg, z) < 0.0) {
            out.v.col(z) = -out.v.col(z);
            out.u.col(z) = -out.u.col(z);
        }
    }
    return out;
}

}  // namespace mwclass
