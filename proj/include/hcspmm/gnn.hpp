#ifndef HCSPMM_GNN_HPP
#define HCSPMM_GNN_HPP

#include <chrono>
#include <cmath>
#include <numeric>
#include <string_view>
#include <vector>

#include "matrix.hpp"
#include "parallel.hpp"
#include "spmm.hpp"
#include "window.hpp"

namespace hcspmm {

enum class Normalization {
    Gcn,           // D~^-1/2 (A + I) D~^-1/2, D~ = rowsum(A + I)
    RowNormalized, // D^-1 A
    Raw,           // A
    SelfLoopSum,   // A + I (sum aggregation)
};

inline SparseCsr<double> normalize_adj(const Graph& g, Normalization mode = Normalization::Gcn) {
    const auto& a = g.adjacency;
    detail::require(a.square(), "normalize_adj: adjacency is not square");
    const index_t n = a.num_rows;
    if (mode == Normalization::Raw) return a;

    std::vector<Triplet<double>> entries = a.triplets();
    if (mode == Normalization::Gcn || mode == Normalization::SelfLoopSum)
        for (index_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
    auto m = csr_from_triplets<double>(n, n, std::move(entries));
    if (mode == Normalization::SelfLoopSum) return m;

    std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
    for (index_t i = 0; i < n; ++i)
        for (double v : m.row_values(i)) deg[i] += v;
    for (index_t i = 0; i < n; ++i) {
        for (index_t k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) {
            const index_t j = m.col_idx[k];
            if (mode == Normalization::Gcn)
                m.values[k] /= std::sqrt(deg[i] * deg[j]);  // product keeps (i,j) and (j,i) identical
            else
                m.values[k] /= deg[i];
        }
    }
    return m;
}

/// Normalized adjacency prepared once for repeated layer passes.
template <typename T>
struct AggregationOperator {
    SparseCsr<T> matrix;
    Partition<T> windows;
    bool symmetric = false;

    static AggregationOperator build(const SparseCsr<double>& a_norm, unsigned threads = 1) {
        AggregationOperator op;
        op.matrix = a_norm.template cast<T>();
        op.windows = partition(op.matrix, kWindowHeight, threads);
        op.symmetric = is_symmetric(op.matrix);
        return op;
    }
    index_t num_rows() const { return matrix.num_rows; }
};

template <typename T>
struct GnnLayer {
    DenseMatrix<T> weight;  // d_in × d_out

    index_t d_in() const { return weight.rows; }
    index_t d_out() const { return weight.dim; }
};

enum class FusionMode { Unfused, Fused };

inline std::string_view to_string(FusionMode m) {
    return m == FusionMode::Fused ? "fused" : "unfused";
}

/// Scalar-value traffic through the global intermediate buffer between the
/// aggregation and update phases, plus logical pass counts.
struct TrafficReport {
    index_t intermediate_writes = 0;
    index_t intermediate_reads = 0;
    index_t pass_launches = 0;
    // Z materialized for the backward pass (fused forward only).
    index_t cache_writes = 0;
    index_t cache_passes = 0;

    friend bool operator==(const TrafficReport&, const TrafficReport&) = default;
};

template <typename T>
struct ForwardResult {
    DenseMatrix<T> x_next;
    DenseMatrix<T> z_cache;
    TrafficReport traffic;
};

template <typename T>
struct BackwardResult {
    DenseMatrix<T> grad_w;
    DenseMatrix<T> grad_x;
    TrafficReport traffic;
};

namespace detail {

/// out[r] = a[r] · b for rows [r0, r1) of a; inner index summed ascending.
template <typename T>
void gemm_rows(std::span<const T> a, index_t a_cols, const DenseMatrix<T>& b, std::span<T> out,
               index_t rows) {
    for (index_t r = 0; r < rows; ++r) {
        T* o = out.data() + r * b.dim;
        for (index_t j = 0; j < b.dim; ++j) {
            T acc{};
            for (index_t k = 0; k < a_cols; ++k) acc += a[r * a_cols + k] * b(k, j);
            o[j] = acc;
        }
    }
}

/// out[r][k] = Σ_j g[r][j] · w[k][j] (row r of g times w^T), j ascending.
template <typename T>
void gemm_rows_bt(std::span<const T> g, const DenseMatrix<T>& w, std::span<T> out, index_t rows) {
    const index_t d_out = w.dim;
    for (index_t r = 0; r < rows; ++r) {
        for (index_t k = 0; k < w.rows; ++k) {
            T acc{};
            for (index_t j = 0; j < d_out; ++j) acc += g[r * d_out + j] * w(k, j);
            out[r * w.rows + k] = acc;
        }
    }
}

/// acc += z[rows]^T · g[rows], rows ascending.
template <typename T>
void accumulate_zt_g(std::span<const T> z, index_t d_in, std::span<const T> g, index_t d_out,
                     index_t rows, DenseMatrix<T>& acc) {
    for (index_t r = 0; r < rows; ++r)
        for (index_t k = 0; k < d_in; ++k) {
            const T zk = z[r * d_in + k];
            for (index_t j = 0; j < d_out; ++j) acc(k, j) += zk * g[r * d_out + j];
        }
}

template <typename T>
std::span<const T> rows_of(const DenseMatrix<T>& m, index_t r0, index_t count) {
    return {m.data.data() + r0 * m.dim, static_cast<std::size_t>(count * m.dim)};
}

template <typename T>
std::span<T> rows_of(DenseMatrix<T>& m, index_t r0, index_t count) {
    return {m.data.data() + r0 * m.dim, static_cast<std::size_t>(count * m.dim)};
}

}  // namespace detail

/// x_next = (Ā·X)·W. Unfused writes Z to a global buffer and reads it back
/// for the update; fused aggregates each window into scratch and multiplies
/// by W immediately. Fused materializes z_cache in a separate pass.
template <typename T>
ForwardResult<T> forward(const GnnLayer<T>& layer, const AggregationOperator<T>& a,
                         const DenseMatrix<T>& x, FusionMode mode, const Assignment& assignment,
                         unsigned threads = 1) {
    detail::require(a.matrix.num_cols == x.rows, "forward: Ā columns != X rows");
    detail::require(layer.d_in() == x.dim, "forward: weight rows != X dim");
    const index_t n = a.num_rows(), d_in = layer.d_in(), d_out = layer.d_out();
    ForwardResult<T> res;
    res.x_next = DenseMatrix<T>(n, d_out);

    if (mode == FusionMode::Unfused) {
        res.z_cache = spmm_hybrid(a.windows, assignment, x, threads).z;
        res.traffic.intermediate_writes = n * d_in;
        res.traffic.intermediate_reads = n * d_in;
        res.traffic.pass_launches = 2;
        const auto& z = res.z_cache;
        parallel_for(static_cast<index_t>(a.windows.size()), threads, [&](index_t i) {
            const auto& w = a.windows.windows[i];
            detail::gemm_rows(detail::rows_of(z, w.row_start, w.row_count), d_in, layer.weight,
                              detail::rows_of(res.x_next, w.row_start, w.row_count), w.row_count);
        });
        return res;
    }

    detail::require(assignment.size() == a.windows.size(), "forward: assignment length mismatch");
    kernels::check_partition_input(a.windows, x);
    parallel_for(static_cast<index_t>(a.windows.size()), threads, [&](index_t i) {
        const auto& w = a.windows.windows[i];
        std::vector<T> scratch(static_cast<std::size_t>(w.row_count * d_in), T{});
        kernels::run_window(assignment[i], w, x, std::span<const index_t>(w.nonzero_cols),
                            std::span<T>(scratch));
        detail::gemm_rows(std::span<const T>(scratch), d_in, layer.weight,
                          detail::rows_of(res.x_next, w.row_start, w.row_count), w.row_count);
    });
    res.traffic.pass_launches = 1;
    res.z_cache = spmm_hybrid(a.windows, assignment, x, threads).z;
    res.traffic.cache_writes = n * d_in;
    res.traffic.cache_passes = 1;
    return res;
}

/// grad_w = Zᵀ·G, grad_x = Ā·(G·Wᵀ). Requires Ā symmetric so the
/// aggregation needs no transpose. Unfused stores G·Wᵀ globally between
/// passes; fused recomputes the needed rows of G·Wᵀ inside each window's
/// pass and adds the window's Zᵀ·G contribution there, reducing grad_w in
/// ascending window order.
template <typename T>
BackwardResult<T> backward(const GnnLayer<T>& layer, const AggregationOperator<T>& a,
                           const DenseMatrix<T>& z_cache, const DenseMatrix<T>& grad_next,
                           FusionMode mode, const Assignment& assignment, unsigned threads = 1) {
    detail::require(a.symmetric, "backward: normalized adjacency must be symmetric");
    const index_t n = a.num_rows(), d_in = layer.d_in(), d_out = layer.d_out();
    detail::require(z_cache.rows == n && z_cache.dim == d_in, "backward: z_cache shape mismatch");
    detail::require(grad_next.rows == n && grad_next.dim == d_out,
                    "backward: upstream gradient shape mismatch");
    detail::require(assignment.size() == a.windows.size(), "backward: assignment length mismatch");

    BackwardResult<T> res;
    res.grad_w = DenseMatrix<T>(d_in, d_out);
    const auto nwin = static_cast<index_t>(a.windows.size());

    if (mode == FusionMode::Unfused) {
        DenseMatrix<T> grad_z(n, d_in);
        detail::gemm_rows_bt(std::span<const T>(grad_next.data), layer.weight,
                             std::span<T>(grad_z.data), n);
        detail::accumulate_zt_g(std::span<const T>(z_cache.data), d_in,
                                std::span<const T>(grad_next.data), d_out, n, res.grad_w);
        res.grad_x = spmm_hybrid(a.windows, assignment, grad_z, threads).z;
        res.traffic.intermediate_writes = n * d_in;
        res.traffic.intermediate_reads = n * d_in;
        res.traffic.pass_launches = 2;
        return res;
    }

    res.grad_x = DenseMatrix<T>(n, d_in);
    std::vector<DenseMatrix<T>> partial(static_cast<std::size_t>(nwin));
    parallel_for(nwin, threads, [&](index_t i) {
        const auto& w = a.windows.windows[i];
        partial[i] = DenseMatrix<T>(d_in, d_out);
        detail::accumulate_zt_g(detail::rows_of(z_cache, w.row_start, w.row_count), d_in,
                                detail::rows_of(grad_next, w.row_start, w.row_count), d_out,
                                w.row_count, partial[i]);
        if (w.empty()) return;
        // Rows of G·Wᵀ for this window's non-zero columns, condensed.
        DenseMatrix<T> staged(w.ncols(), d_in);
        for (index_t c = 0; c < w.ncols(); ++c)
            detail::gemm_rows_bt(detail::rows_of(grad_next, w.nonzero_cols[c], 1), layer.weight,
                                 staged.row(c), 1);
        std::vector<index_t> local(static_cast<std::size_t>(w.ncols()));
        std::iota(local.begin(), local.end(), index_t{0});
        kernels::run_window(assignment[i], w, staged, std::span<const index_t>(local),
                            detail::rows_of(res.grad_x, w.row_start, w.row_count));
    });
    for (const auto& p : partial)
        for (std::size_t k = 0; k < p.data.size(); ++k) res.grad_w.data[k] += p.data[k];
    res.traffic.pass_launches = 1;
    return res;
}

struct ModeBench {
    FusionMode mode;
    double forward_seconds = 0;
    double backward_seconds = 0;
    TrafficReport forward_traffic;
    TrafficReport backward_traffic;
};

/// Mean wall-clock forward and backward time per mode over `repeats` runs.
template <typename T>
ModeBench layer_bench(const GnnLayer<T>& layer, const AggregationOperator<T>& a,
                      const DenseMatrix<T>& x, const Assignment& assignment, FusionMode mode,
                      index_t repeats, unsigned threads = 1) {
    detail::require(repeats >= 1, "layer_bench: repeats must be >= 1");
    ModeBench b{mode};
    DenseMatrix<T> grad(a.num_rows(), layer.d_out(), T{1});
    for (index_t i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        auto f = forward(layer, a, x, mode, assignment, threads);
        const auto t1 = std::chrono::steady_clock::now();
        auto g = backward(layer, a, f.z_cache, grad, mode, assignment, threads);
        const auto t2 = std::chrono::steady_clock::now();
        b.forward_seconds += std::chrono::duration<double>(t1 - t0).count();
        b.backward_seconds += std::chrono::duration<double>(t2 - t1).count();
        b.forward_traffic = f.traffic;
        b.backward_traffic = g.traffic;
    }
    b.forward_seconds /= static_cast<double>(repeats);
    b.backward_seconds /= static_cast<double>(repeats);
    return b;
}

}  // namespace hcspmm

#endif
