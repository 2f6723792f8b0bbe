#ifndef HCSPMM_RANDOM_HPP
#define HCSPMM_RANDOM_HPP

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_set>

#include "matrix.hpp"

namespace hcspmm {

using Rng = std::mt19937_64;

/// Random square or rectangular CSR with roughly `density`·rows·cols entries,
/// values uniform in [lo, hi].
template <typename T>
SparseCsr<T> random_csr(index_t rows, index_t cols, double density, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
    std::uniform_real_distribution<double> val(lo, hi);
    std::bernoulli_distribution keep(std::clamp(density, 0.0, 1.0));
    std::vector<Triplet<T>> entries;
    for (index_t r = 0; r < rows; ++r)
        for (index_t c = 0; c < cols; ++c)
            if (keep(rng)) entries.push_back({r, c, static_cast<T>(val(rng))});
    return csr_from_triplets<T>(rows, cols, std::move(entries));
}

template <typename T>
DenseMatrix<T> random_dense(index_t rows, index_t dim, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> val(lo, hi);
    DenseMatrix<T> x(rows, dim);
    for (auto& v : x.data) v = static_cast<T>(val(rng));
    return x;
}

inline std::vector<index_t> random_permutation(index_t n, Rng& rng) {
    std::vector<index_t> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), index_t{0});
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

/// Undirected graph made of `communities` blocks of `block` vertices; an edge
/// appears with probability p_in inside a block and p_out across blocks.
/// Vertex ids are block-contiguous.
inline Graph block_community_graph(index_t communities, index_t block, double p_in, double p_out,
                                   Rng& rng) {
    const index_t n = communities * block;
    std::bernoulli_distribution in(p_in), out(p_out);
    std::vector<Triplet<double>> entries;
    for (index_t u = 0; u < n; ++u) {
        for (index_t v = u + 1; v < n; ++v) {
            const bool same = u / block == v / block;
            if (same ? in(rng) : out(rng)) {
                entries.push_back({u, v, 1.0});
                entries.push_back({v, u, 1.0});
            }
        }
    }
    return Graph(csr_from_triplets<double>(n, n, std::move(entries)), true);
}

/// Erdos-Renyi G(n, p), undirected, no self-loops.
inline Graph random_gnp(index_t n, double p, Rng& rng) {
    return block_community_graph(1, n, p, 0.0, rng);
}

inline Graph relabel(const Graph& g, std::span<const index_t> perm) {
    return Graph(permute_symmetric(g.adjacency, perm), g.undirected);
}

}  // namespace hcspmm

#endif
