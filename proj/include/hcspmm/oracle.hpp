#ifndef HCSPMM_ORACLE_HPP
#define HCSPMM_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include "matrix.hpp"

namespace hcspmm {

/// Reference Z = A·X over the densified A, one dense row at a time. Each
/// output accumulates over k = 0..cols-1 in order, skipping zero weights.
/// Test use only.
template <typename T>
DenseMatrix<T> spmm_dense_oracle(const SparseCsr<T>& a, const DenseMatrix<T>& x) {
    detail::require(a.num_cols == x.rows, "spmm_dense_oracle: A.cols != X.rows");
    std::vector<T> dense_row(static_cast<std::size_t>(a.num_cols), T{});
    DenseMatrix<T> z(a.num_rows, x.dim);
    for (index_t i = 0; i < a.num_rows; ++i) {
        for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            dense_row[a.col_idx[k]] = a.values[k];
        auto zi = z.row(i);
        for (index_t k = 0; k < a.num_cols; ++k) {
            const T v = dense_row[k];
            if (v == T{}) continue;
            const auto xk = x.row(k);
            for (index_t j = 0; j < x.dim; ++j) zi[j] += v * xk[j];
        }
        for (index_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) dense_row[a.col_idx[k]] = T{};
    }
    return z;
}

template <typename T, typename U>
double max_abs_diff(const DenseMatrix<T>& a, const DenseMatrix<U>& b) {
    detail::require(a.rows == b.rows && a.dim == b.dim, "max_abs_diff: shape mismatch");
    double m = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    return m;
}

/// Norm-wise relative error: max|a - ref| / max|ref|, or the absolute error
/// when the reference is identically zero.
template <typename T, typename U>
double max_relative_error(const DenseMatrix<T>& a, const DenseMatrix<U>& ref) {
    const double diff = max_abs_diff(a, ref);
    double scale = 0;
    for (const auto& v : ref.data) scale = std::max(scale, std::abs(static_cast<double>(v)));
    return scale > 0 ? diff / scale : diff;
}

}  // namespace hcspmm

#endif
