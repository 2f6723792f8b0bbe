#ifndef HCSPMM_WINDOW_HPP
#define HCSPMM_WINDOW_HPP

#include <algorithm>
#include <span>
#include <vector>

#include "matrix.hpp"
#include "parallel.hpp"

namespace hcspmm {

/// A horizontal slice of consecutive rows with its non-zero columns
/// condensed to the front: condensed column c stands for original column
/// nonzero_cols[c], and nonzero_cols is ascending.
template <typename T>
struct RowWindow {
    index_t window_id = 0;
    index_t row_start = 0;
    index_t row_count = 0;
    std::vector<index_t> nonzero_cols;
    // Per-row entries, CSR-style over the window's rows.
    std::vector<index_t> entry_ptr{0};
    std::vector<index_t> condensed_col;
    std::vector<T> values;

    index_t nnz() const { return static_cast<index_t>(condensed_col.size()); }
    index_t ncols() const { return static_cast<index_t>(nonzero_cols.size()); }
    bool empty() const { return condensed_col.empty(); }

    /// Expands entries back to (global row, original column, value).
    std::vector<Triplet<T>> decondense() const {
        std::vector<Triplet<T>> out;
        out.reserve(condensed_col.size());
        for (index_t r = 0; r < row_count; ++r)
            for (index_t k = entry_ptr[r]; k < entry_ptr[r + 1]; ++k)
                out.push_back({row_start + r, nonzero_cols[condensed_col[k]], values[k]});
        return out;
    }
};

/// Windows covering every row of a matrix exactly once, in row order.
template <typename T>
struct Partition {
    index_t num_rows = 0;
    index_t num_cols = 0;
    index_t window_height = kWindowHeight;
    std::vector<RowWindow<T>> windows;

    std::size_t size() const { return windows.size(); }
    const RowWindow<T>& operator[](std::size_t i) const { return windows[i]; }
    auto begin() const { return windows.begin(); }
    auto end() const { return windows.end(); }
};

template <typename T>
RowWindow<T> make_window(const SparseCsr<T>& a, index_t window_id, index_t row_start,
                         index_t row_count) {
    RowWindow<T> w;
    w.window_id = window_id;
    w.row_start = row_start;
    w.row_count = row_count;
    const index_t lo = a.row_ptr[row_start];
    const index_t hi = a.row_ptr[row_start + row_count];

    w.nonzero_cols.assign(a.col_idx.begin() + lo, a.col_idx.begin() + hi);
    std::ranges::sort(w.nonzero_cols);
    const auto dup = std::ranges::unique(w.nonzero_cols);
    w.nonzero_cols.erase(dup.begin(), dup.end());

    w.entry_ptr.assign(static_cast<std::size_t>(row_count) + 1, 0);
    w.condensed_col.reserve(static_cast<std::size_t>(hi - lo));
    w.values.assign(a.values.begin() + lo, a.values.begin() + hi);
    for (index_t r = 0; r < row_count; ++r) {
        for (index_t k = a.row_ptr[row_start + r]; k < a.row_ptr[row_start + r + 1]; ++k) {
            const auto it = std::ranges::lower_bound(w.nonzero_cols, a.col_idx[k]);
            w.condensed_col.push_back(static_cast<index_t>(it - w.nonzero_cols.begin()));
        }
        w.entry_ptr[r + 1] = static_cast<index_t>(w.condensed_col.size());
    }
    return w;
}

/// Splits `a` into ceil(rows / height) windows; the last one may be short.
template <typename T>
Partition<T> partition(const SparseCsr<T>& a, index_t window_height = kWindowHeight,
                       unsigned threads = 1) {
    detail::require(window_height >= 1, "partition: window_height must be >= 1");
    Partition<T> p;
    p.num_rows = a.num_rows;
    p.num_cols = a.num_cols;
    p.window_height = window_height;
    const index_t count = detail::ceil_div(a.num_rows, window_height);
    p.windows.resize(static_cast<std::size_t>(count));
    parallel_for(count, threads, [&](index_t w) {
        const index_t start = w * window_height;
        p.windows[w] = make_window(a, w, start, std::min(window_height, a.num_rows - start));
    });
    return p;
}

struct WindowFeatures {
    index_t ncols = 0;
    index_t nnz = 0;
    index_t row_count = kWindowHeight;
    double density = 0;              // nnz / (row_count · ncols)
    double computing_intensity = 0;  // nnz / ncols

    static WindowFeatures from_counts(index_t nnz, index_t ncols,
                                      index_t row_count = kWindowHeight) {
        WindowFeatures f;
        f.ncols = ncols;
        f.nnz = nnz;
        f.row_count = row_count;
        if (ncols > 0 && nnz > 0) {
            f.density = static_cast<double>(nnz) / static_cast<double>(row_count * ncols);
            f.computing_intensity = static_cast<double>(nnz) / static_cast<double>(ncols);
        }
        return f;
    }
};

template <typename T>
WindowFeatures features(const RowWindow<T>& w) {
    return WindowFeatures::from_counts(w.nnz(), w.ncols(), w.row_count);
}

template <typename T>
std::vector<WindowFeatures> features(const Partition<T>& p) {
    std::vector<WindowFeatures> out;
    out.reserve(p.size());
    for (const auto& w : p) out.push_back(features(w));
    return out;
}

/// Number of condensed 16×tile_cols blocks the tile executor walks.
inline index_t tile_count(index_t ncols, index_t tile_cols = kTileCols) {
    detail::require(tile_cols >= 1, "tile_count: tile_cols must be >= 1");
    return detail::ceil_div(ncols, tile_cols);
}

template <typename T>
index_t tile_count(const RowWindow<T>& w, index_t tile_cols = kTileCols) {
    return tile_count(w.ncols(), tile_cols);
}

}  // namespace hcspmm

#endif
