#include "atlas/linalg.hpp"

namespace atlas {

void SparseMatrix::append_row(const std::vector<std::pair<int, double>>& entries) {
    if (appended_ >= rows_) throw std::logic_error("SparseMatrix: too many rows appended");
    int prev = -1;
    for (const auto& [c, v] : entries) {
        if (c < 0 || c >= cols_) throw std::out_of_range("SparseMatrix: column out of range");
        if (c <= prev) throw std::logic_error("SparseMatrix: row entries must be sorted by column");
        prev = c;
        col_.push_back(c);
        val_.push_back(v);
    }
    ++appended_;
    row_ptr_[appended_] = static_cast<int>(col_.size());
}

void SparseMatrix::apply(const double* x, double* y, int c, int batch) const {
    for (int b = 0; b < batch; ++b) {
        const double* xb = x + static_cast<size_t>(b) * cols_ * c;
        double* yb = y + static_cast<size_t>(b) * rows_ * c;
        for (int r = 0; r < rows_; ++r) {
            double* yrow = yb + static_cast<size_t>(r) * c;
            for (int j = 0; j < c; ++j) yrow[j] = 0.0;
            for (int e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
                const double w = val_[e];
                const double* xrow = xb + static_cast<size_t>(col_[e]) * c;
                for (int j = 0; j < c; ++j) yrow[j] += w * xrow[j];
            }
        }
    }
}

void SparseMatrix::apply_transpose_add(const double* g, double* xg, int c, int batch) const {
    for (int b = 0; b < batch; ++b) {
        const double* gb = g + static_cast<size_t>(b) * rows_ * c;
        double* xb = xg + static_cast<size_t>(b) * cols_ * c;
        for (int r = 0; r < rows_; ++r) {
            const double* grow = gb + static_cast<size_t>(r) * c;
            for (int e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
                const double w = val_[e];
                double* xrow = xb + static_cast<size_t>(col_[e]) * c;
                for (int j = 0; j < c; ++j) xrow[j] += w * grow[j];
            }
        }
    }
}

Mat SparseMatrix::apply(const Mat& x) const {
    if (x.rows != cols_) throw std::invalid_argument("SparseMatrix::apply: row count mismatch");
    Mat y(rows_, x.cols);
    apply(x.data.data(), y.data.data(), x.cols, 1);
    return y;
}

Mat SparseMatrix::to_dense() const {
    Mat d(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
        for (int e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) d(r, col_[e]) = val_[e];
    return d;
}

double SparseMatrix::row_sum(int r) const {
    double s = 0.0;
    for (int e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) s += val_[e];
    return s;
}

Mat matmul_dense(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul_dense: inner dimension mismatch");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (int p = 0; p < a.cols; ++p) {
            const double av = arow[p];
            const double* brow = b.row(p);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

}  // namespace atlas
