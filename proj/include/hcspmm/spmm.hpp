#ifndef HCSPMM_SPMM_HPP
#define HCSPMM_SPMM_HPP

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "matrix.hpp"
#include "parallel.hpp"
#include "window.hpp"

namespace hcspmm {

/// Execution path for one row window.
enum class Path : unsigned char { Scalar, Tile };

using Assignment = std::vector<Path>;

inline std::string_view to_string(Path p) { return p == Path::Scalar ? "scalar" : "tile"; }

struct SpmmStats {
    index_t windows_scalar = 0;
    index_t windows_tile = 0;
    index_t entries_scalar = 0;  // nonzeros consumed one at a time
    index_t entries_tile = 0;    // nonzeros covered by tile-path windows
    index_t tiles_processed = 0; // 16×8 condensed blocks materialized

    SpmmStats& operator+=(const SpmmStats& o) {
        windows_scalar += o.windows_scalar;
        windows_tile += o.windows_tile;
        entries_scalar += o.entries_scalar;
        entries_tile += o.entries_tile;
        tiles_processed += o.tiles_processed;
        return *this;
    }
    friend bool operator==(const SpmmStats&, const SpmmStats&) = default;
};

template <typename T>
struct SpmmResult {
    DenseMatrix<T> z;
    SpmmStats stats;
};

namespace kernels {

/// Per-entry traversal of one window; each output element accumulates its
/// row's entries in ascending column order. Condensed column c reads row
/// col_map[c] of x; `out` is the window's row_count×x.dim output block.
template <typename T>
SpmmStats window_scalar(const RowWindow<T>& w, const DenseMatrix<T>& x,
                        std::span<const index_t> col_map, std::span<T> out) {
    SpmmStats s;
    if (w.empty()) return s;
    const index_t dim = x.dim;
    for (index_t r = 0; r < w.row_count; ++r) {
        T* zr = out.data() + r * dim;
        for (index_t k = w.entry_ptr[r]; k < w.entry_ptr[r + 1]; ++k) {
            const T v = w.values[k];
            const auto xr = x.row(col_map[w.condensed_col[k]]);
            for (index_t j = 0; j < dim; ++j) zr[j] += v * xr[j];
        }
    }
    s.windows_scalar = 1;
    s.entries_scalar = w.nnz();
    return s;
}

/// Dense-tile traversal of one window: for every condensed block of
/// kTileCols columns, materialize the zero-filled 16×8 tile and the gathered
/// 8×dim slice of x, then accumulate tile·slice in column blocks of
/// `dim_tile`. Rows beyond row_count are zero padding and are not stored.
template <typename T>
SpmmStats window_tile(const RowWindow<T>& w, const DenseMatrix<T>& x,
                      std::span<const index_t> col_map, std::span<T> out,
                      index_t dim_tile = kDimTile) {
    SpmmStats s;
    if (w.empty()) return s;
    constexpr index_t H = kWindowHeight;
    constexpr index_t C = kTileCols;
    detail::require(w.row_count <= H, "window_tile: window taller than 16 rows");
    const index_t dim = x.dim;

    std::array<T, H * C> tile{};
    std::vector<T> slice(static_cast<std::size_t>(C * dim));
    std::array<index_t, H> cursor{};
    for (index_t r = 0; r < w.row_count; ++r) cursor[r] = w.entry_ptr[r];

    const index_t blocks = tile_count(w.ncols(), C);
    for (index_t b = 0; b < blocks; ++b) {
        const index_t col_lo = b * C;
        tile.fill(T{});
        for (index_t r = 0; r < w.row_count; ++r) {
            index_t& k = cursor[r];
            while (k < w.entry_ptr[r + 1] && w.condensed_col[k] < col_lo + C) {
                tile[r * C + (w.condensed_col[k] - col_lo)] = w.values[k];
                ++k;
            }
        }
        for (index_t c = 0; c < C; ++c) {
            T* dst = slice.data() + c * dim;
            if (col_lo + c < w.ncols()) {
                const auto xr = x.row(col_map[col_lo + c]);
                std::copy(xr.begin(), xr.end(), dst);
            } else {
                std::fill(dst, dst + dim, T{});
            }
        }
        for (index_t j0 = 0; j0 < dim; j0 += dim_tile) {
            const index_t j1 = std::min(dim, j0 + dim_tile);
            for (index_t r = 0; r < w.row_count; ++r) {
                T* zr = out.data() + r * dim;
                for (index_t j = j0; j < j1; ++j) {
                    T acc = zr[j];
                    for (index_t c = 0; c < C; ++c) acc += tile[r * C + c] * slice[c * dim + j];
                    zr[j] = acc;
                }
            }
        }
        ++s.tiles_processed;
    }
    s.windows_tile = 1;
    s.entries_tile = w.nnz();
    return s;
}

/// Runs one window on `path`, writing its rows of the product into `out`.
template <typename T>
SpmmStats run_window(Path path, const RowWindow<T>& w, const DenseMatrix<T>& x,
                     std::span<const index_t> col_map, std::span<T> out,
                     index_t dim_tile = kDimTile) {
    return path == Path::Tile ? window_tile(w, x, col_map, out, dim_tile)
                              : window_scalar(w, x, col_map, out);
}

template <typename T>
std::span<T> window_rows(DenseMatrix<T>& z, const RowWindow<T>& w) {
    return {z.data.data() + w.row_start * z.dim, static_cast<std::size_t>(w.row_count * z.dim)};
}

template <typename T>
void check_partition_input(const Partition<T>& p, const DenseMatrix<T>& x) {
    detail::require(p.num_cols == x.rows, "spmm: matrix columns (" + std::to_string(p.num_cols) +
                                              ") != dense rows (" + std::to_string(x.rows) + ")");
    for (const auto& w : p)
        for (index_t c : w.nonzero_cols)
            detail::require(c >= 0 && c < x.rows, "spmm: column map entry out of range");
}

}  // namespace kernels

/// Row-by-row CSR product. Stats count the non-empty 16-row windows.
template <typename T>
SpmmResult<T> spmm_scalar(const SparseCsr<T>& a, const DenseMatrix<T>& x, unsigned threads = 1) {
    detail::require(a.num_cols == x.rows, "spmm_scalar: A.cols != X.rows");
    SpmmResult<T> out{DenseMatrix<T>(a.num_rows, x.dim), {}};
    const index_t windows = detail::ceil_div(a.num_rows, kWindowHeight);
    parallel_for(windows, threads, [&](index_t w) {
        const index_t r1 = std::min(a.num_rows, (w + 1) * kWindowHeight);
        for (index_t r = w * kWindowHeight; r < r1; ++r) {
            auto zr = out.z.row(r);
            for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
                const T v = a.values[k];
                const auto xr = x.row(a.col_idx[k]);
                for (index_t j = 0; j < x.dim; ++j) zr[j] += v * xr[j];
            }
        }
    });
    for (index_t w = 0; w < windows; ++w) {
        const index_t r0 = w * kWindowHeight;
        const index_t r1 = std::min(a.num_rows, r0 + kWindowHeight);
        if (a.row_ptr[r1] > a.row_ptr[r0]) ++out.stats.windows_scalar;
    }
    out.stats.entries_scalar = a.nnz();
    return out;
}

template <typename T>
SpmmResult<T> spmm_hybrid(const Partition<T>& p, const Assignment& assignment,
                          const DenseMatrix<T>& x, unsigned threads = 1,
                          index_t dim_tile = kDimTile) {
    detail::require(assignment.size() == p.size(),
                    "spmm_hybrid: assignment length " + std::to_string(assignment.size()) +
                        " != window count " + std::to_string(p.size()));
    detail::require(dim_tile >= 1, "spmm: dim_tile must be >= 1");
    kernels::check_partition_input(p, x);
    SpmmResult<T> out{DenseMatrix<T>(p.num_rows, x.dim), {}};
    std::vector<SpmmStats> per_window(p.size());
    parallel_for(static_cast<index_t>(p.size()), threads, [&](index_t i) {
        const auto& w = p.windows[i];
        per_window[i] = kernels::run_window(assignment[i], w, x, std::span<const index_t>(w.nonzero_cols),
                                            kernels::window_rows(out.z, w), dim_tile);
    });
    for (const auto& s : per_window) out.stats += s;
    return out;
}

/// Every window on the tile path.
template <typename T>
SpmmResult<T> spmm_tile(const Partition<T>& p, const DenseMatrix<T>& x, unsigned threads = 1,
                        index_t dim_tile = kDimTile) {
    return spmm_hybrid(p, Assignment(p.size(), Path::Tile), x, threads, dim_tile);
}

}  // namespace hcspmm

#endif
