#ifndef HCSPMM_MATRIX_HPP
#define HCSPMM_MATRIX_HPP

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "types.hpp"

namespace hcspmm {

template <typename T>
struct Triplet {
    index_t row;
    index_t col;
    T value;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Compressed sparse row matrix.
///
/// Columns within a row are strictly ascending. Instances are treated as
/// immutable once validated; every loader and transform returns a fresh one.
template <typename T>
struct SparseCsr {
    index_t num_rows = 0;
    index_t num_cols = 0;
    std::vector<index_t> row_ptr{0};
    std::vector<index_t> col_idx;
    std::vector<T> values;

    index_t nnz() const { return static_cast<index_t>(col_idx.size()); }
    index_t row_nnz(index_t r) const { return row_ptr[r + 1] - row_ptr[r]; }
    bool square() const { return num_rows == num_cols; }

    std::span<const index_t> row_cols(index_t r) const {
        return {col_idx.data() + row_ptr[r], static_cast<std::size_t>(row_nnz(r))};
    }
    std::span<const T> row_values(index_t r) const {
        return {values.data() + row_ptr[r], static_cast<std::size_t>(row_nnz(r))};
    }

    /// Throws InvariantError if any structural invariant is broken.
    void validate() const {
        using detail::ensure;
        ensure(num_rows >= 0 && num_cols >= 0, "csr: negative dimension");
        ensure(static_cast<index_t>(row_ptr.size()) == num_rows + 1,
               "csr: row_ptr length != num_rows + 1");
        ensure(row_ptr.front() == 0, "csr: row_ptr[0] != 0");
        ensure(row_ptr.back() == nnz(), "csr: row_ptr[num_rows] != nnz");
        ensure(col_idx.size() == values.size(), "csr: col_idx/values length mismatch");
        for (index_t r = 0; r < num_rows; ++r) {
            ensure(row_ptr[r] <= row_ptr[r + 1],
                   "csr: row_ptr decreases at row " + std::to_string(r));
            for (index_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                ensure(col_idx[k] >= 0 && col_idx[k] < num_cols,
                       "csr: column out of range in row " + std::to_string(r));
                ensure(k == row_ptr[r] || col_idx[k - 1] < col_idx[k],
                       "csr: columns not strictly ascending in row " + std::to_string(r));
            }
        }
    }

    std::vector<Triplet<T>> triplets() const {
        std::vector<Triplet<T>> out;
        out.reserve(col_idx.size());
        for (index_t r = 0; r < num_rows; ++r)
            for (index_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
                out.push_back({r, col_idx[k], values[k]});
        return out;
    }

    template <typename U>
    SparseCsr<U> cast() const {
        SparseCsr<U> out;
        out.num_rows = num_rows;
        out.num_cols = num_cols;
        out.row_ptr = row_ptr;
        out.col_idx = col_idx;
        out.values.assign(values.begin(), values.end());
        return out;
    }

    friend bool operator==(const SparseCsr&, const SparseCsr&) = default;
};

/// Builds a validated CSR from an unordered coordinate list.
/// Duplicate coordinates are summed in input order.
template <typename T>
SparseCsr<T> csr_from_triplets(index_t num_rows, index_t num_cols,
                               std::vector<Triplet<T>> entries) {
    for (const auto& e : entries) {
        detail::require(e.row >= 0 && e.row < num_rows && e.col >= 0 && e.col < num_cols,
                        "triplet (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                            ") outside " + std::to_string(num_rows) + "x" +
                            std::to_string(num_cols));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });

    SparseCsr<T> out;
    out.num_rows = num_rows;
    out.num_cols = num_cols;
    out.row_ptr.assign(static_cast<std::size_t>(num_rows) + 1, 0);
    out.col_idx.reserve(entries.size());
    out.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (i > 0 && entries[i - 1].row == e.row && entries[i - 1].col == e.col) {
            out.values.back() += e.value;
            continue;
        }
        out.col_idx.push_back(e.col);
        out.values.push_back(e.value);
        ++out.row_ptr[e.row + 1];
    }
    std::partial_sum(out.row_ptr.begin(), out.row_ptr.end(), out.row_ptr.begin());
    out.validate();
    return out;
}

template <typename T>
SparseCsr<T> identity_csr(index_t n) {
    std::vector<Triplet<T>> entries;
    entries.reserve(n);
    for (index_t i = 0; i < n; ++i) entries.push_back({i, i, T{1}});
    return csr_from_triplets<T>(n, n, std::move(entries));
}

template <typename T>
SparseCsr<T> transpose(const SparseCsr<T>& a) {
    std::vector<Triplet<T>> entries;
    entries.reserve(a.col_idx.size());
    for (const auto& t : a.triplets()) entries.push_back({t.col, t.row, t.value});
    return csr_from_triplets<T>(a.num_cols, a.num_rows, std::move(entries));
}

/// Exact structural and numeric symmetry (A == A^T entry-wise).
template <typename T>
bool is_symmetric(const SparseCsr<T>& a) {
    return a.square() && transpose(a) == a;
}

/// Symmetric pattern: (u,v) present iff (v,u) present, values ignored.
template <typename T>
bool is_pattern_symmetric(const SparseCsr<T>& a) {
    if (!a.square()) return false;
    const auto t = transpose(a);
    return t.row_ptr == a.row_ptr && t.col_idx == a.col_idx;
}

/// Checks that `perm` is a bijection on [0, n).
inline bool is_permutation(std::span<const index_t> perm, index_t n) {
    if (static_cast<index_t>(perm.size()) != n) return false;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (index_t p : perm) {
        if (p < 0 || p >= n || seen[p]) return false;
        seen[p] = 1;
    }
    return true;
}

inline std::vector<index_t> invert_permutation(std::span<const index_t> perm) {
    std::vector<index_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<index_t>(i);
    return inv;
}

/// Relabels rows and columns: entry (i, j) moves to (perm[i], perm[j]).
template <typename T>
SparseCsr<T> permute_symmetric(const SparseCsr<T>& a, std::span<const index_t> perm) {
    detail::require(a.square(), "permute_symmetric: matrix is not square");
    detail::require(is_permutation(perm, a.num_rows),
                    "permute_symmetric: perm is not a bijection on [0, n)");
    const auto inv = invert_permutation(perm);

    SparseCsr<T> out;
    out.num_rows = a.num_rows;
    out.num_cols = a.num_cols;
    out.row_ptr.assign(static_cast<std::size_t>(a.num_rows) + 1, 0);
    out.col_idx.reserve(a.col_idx.size());
    out.values.reserve(a.values.size());
    std::vector<std::pair<index_t, T>> row;
    for (index_t new_r = 0; new_r < a.num_rows; ++new_r) {
        const index_t old_r = inv[new_r];
        row.clear();
        for (index_t k = a.row_ptr[old_r]; k < a.row_ptr[old_r + 1]; ++k)
            row.emplace_back(perm[a.col_idx[k]], a.values[k]);
        std::sort(row.begin(), row.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
        for (const auto& [c, v] : row) {
            out.col_idx.push_back(c);
            out.values.push_back(v);
        }
        out.row_ptr[new_r + 1] = static_cast<index_t>(out.col_idx.size());
    }
    return out;
}

/// Row-major dense matrix; `dim` is the embedding width.
template <typename T>
struct DenseMatrix {
    index_t rows = 0;
    index_t dim = 0;
    std::vector<T> data;

    DenseMatrix() = default;
    DenseMatrix(index_t r, index_t d, T fill = T{})
        : rows(r), dim(d), data(static_cast<std::size_t>(r * d), fill) {
        detail::require(r >= 0 && d >= 0, "dense: negative dimension");
    }

    T& operator()(index_t r, index_t c) { return data[r * dim + c]; }
    const T& operator()(index_t r, index_t c) const { return data[r * dim + c]; }

    std::span<T> row(index_t r) { return {data.data() + r * dim, static_cast<std::size_t>(dim)}; }
    std::span<const T> row(index_t r) const {
        return {data.data() + r * dim, static_cast<std::size_t>(dim)};
    }

    template <typename U>
    DenseMatrix<U> cast() const {
        DenseMatrix<U> out(rows, dim);
        std::copy(data.begin(), data.end(), out.data.begin());
        return out;
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

template <typename T>
DenseMatrix<T> permute_rows(const DenseMatrix<T>& x, std::span<const index_t> perm) {
    detail::require(is_permutation(perm, x.rows), "permute_rows: perm is not a bijection");
    DenseMatrix<T> out(x.rows, x.dim);
    for (index_t r = 0; r < x.rows; ++r) std::ranges::copy(x.row(r), out.row(perm[r]).begin());
    return out;
}

/// Vertex set plus adjacency; N(v) is row v of `adjacency`.
struct Graph {
    index_t num_vertices = 0;
    SparseCsr<double> adjacency;
    bool undirected = false;

    Graph() = default;
    Graph(SparseCsr<double> adj, bool is_undirected)
        : num_vertices(adj.num_rows), adjacency(std::move(adj)), undirected(is_undirected) {
        detail::require(adjacency.square(), "graph: adjacency is not square");
        if (undirected)
            detail::require(is_pattern_symmetric(adjacency),
                            "graph: undirected flag set but adjacency is not symmetric");
    }

    std::span<const index_t> neighbors(index_t v) const { return adjacency.row_cols(v); }
    index_t degree(index_t v) const { return adjacency.row_nnz(v); }
};

}  // namespace hcspmm

#endif
