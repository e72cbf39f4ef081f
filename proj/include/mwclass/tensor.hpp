#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mwclass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense 3-way array: samples x dim1 x dim2 (n x p x m).  Storage is
// sample-major; within a sample, entries are column-major over (j, k) with
// j fastest, so the block for sample i is exactly vec(X_i) and maps onto a
// column-major p x m Eigen matrix without copying.
class Tensor3 {
  public:
    Tensor3() : Tensor3(1, 1, 1) {}
    Tensor3(int n, int p, int m);
    Tensor3(int n, int p, int m, std::vector<double> values);

    int n() const { return n_; }
    int p() const { return p_; }
    int m() const { return m_; }

    double operator()(int i, int j, int k) const {
        return values_[static_cast<std::size_t>(i) * p_ * m_ + static_cast<std::size_t>(k) * p_ + j];
    }
    double& operator()(int i, int j, int k) {
        return values_[static_cast<std::size_t>(i) * p_ * m_ + static_cast<std::size_t>(k) * p_ + j];
    }

    // p x m view of sample i.
    Eigen::Map<const Matrix> slice(int i) const {
        return Eigen::Map<const Matrix>(values_.data() + static_cast<std::size_t>(i) * p_ * m_, p_, m_);
    }

    // vec(X_i) in the shared column-major order (entry (j,k) at k*p + j).
    Eigen::Map<const Vector> vec_sample(int i) const {
        return Eigen::Map<const Vector>(values_.data() + static_cast<std::size_t>(i) * p_ * m_, p_ * m_);
    }

    // pm x n matrix whose column i is vec(X_i).
    Eigen::Map<const Matrix> as_vectorized() const {
        return Eigen::Map<const Matrix>(values_.data(), p_ * m_, n_);
    }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

  private:
    int n_, p_, m_;
    std::vector<double> values_;
};

struct LabeledDataset {
    Tensor3 tensor;
    std::vector<int> labels;  // entries in {-1, +1}
    std::vector<std::string> dim1_names;  // empty or size p
    std::vector<std::string> dim2_names;  // empty or size m

    // Checks label length/values, name lengths, and entry finiteness.
    void validate() const;
    // Additionally requires both classes present (needed by every fit).
    void validate_for_fit() const;
};

// Row i of the result is X_i . v  (n x p).
Matrix mode2_product(const Tensor3& x, const Vector& v);

// Row i of the result is w' X_i  (n x m).
Matrix mode1_product(const Tensor3& x, const Vector& w);

// Column-major flattening: entry (j, k) of b lands at position k*p + j.
Vector vectorize(const Matrix& b);
Matrix unvectorize(const Vector& b, int p, int m);

// Kronecker product of v (length m) and w (length p); equals vectorize(w v').
Vector kron(const Vector& v, const Vector& w);

struct ThinSvd {
    Matrix u;  // p x r, orthonormal columns
    Vector s;  // r singular values, nonincreasing
    Matrix v;  // m x r, orthonormal columns
};

// Rank-r truncated SVD with a deterministic sign convention: the
// largest-magnitude entry of each V column is positive (ties broken by the
// lowest index), with the matching U column flipped alongside.
ThinSvd thin_svd(const Matrix& b, int r);

}  // namespace mwclass
