// linalg.hpp — dense row-major matrix and fixed-pattern sparse matrix used
// across the mesh, pooling and model code. Double precision throughout.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace atlas {

// Dense row-major matrix of doubles.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return data.size(); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// Compressed sparse row matrix with an immutable pattern. Column indices are
// strictly increasing within each row; apply() walks entries in that order so
// repeated applications are bitwise reproducible.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    // Rows must be appended in order, entries sorted by column.
    void append_row(const std::vector<std::pair<int, double>>& entries);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t nnz() const { return col_.size(); }

    // y = S * x where x is (batch*cols) x c and y is (batch*rows) x c,
    // both row-major; the same matrix is applied to each batch block.
    void apply(const double* x, double* y, int c, int batch = 1) const;

    // xg += S^T * g, the adjoint of apply() with identical blocking.
    void apply_transpose_add(const double* g, double* xg, int c, int batch = 1) const;

    Mat apply(const Mat& x) const;

    Mat to_dense() const;

    double row_sum(int r) const;

    const std::vector<int>& row_ptr() const { return row_ptr_; }
    const std::vector<int>& col_index() const { return col_; }
    const std::vector<double>& values() const { return val_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    int appended_ = 0;
    std::vector<int> row_ptr_;
    std::vector<int> col_;
    std::vector<double> val_;
};

// c = a * b for row-major dense matrices, (m x k) * (k x n).
Mat matmul_dense(const Mat& a, const Mat& b);

}  // namespace atlas
