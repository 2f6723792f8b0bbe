#ifndef HCSPMM_LOA_HPP
#define HCSPMM_LOA_HPP

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "matrix.hpp"

namespace hcspmm {

/// Exact computing intensity elements/columns; 0/0 reads as zero.
struct Intensity {
    index_t elements = 0;
    index_t columns = 0;

    double value() const {
        return columns == 0 ? 0.0 : static_cast<double>(elements) / static_cast<double>(columns);
    }

    // Cross-multiplied comparison; columns == 0 compares as 0/1.
    friend bool operator<(const Intensity& a, const Intensity& b) {
        const auto an = a.columns == 0 ? 0 : a.elements, ad = a.columns == 0 ? 1 : a.columns;
        const auto bn = b.columns == 0 ? 0 : b.elements, bd = b.columns == 0 ? 1 : b.columns;
        return static_cast<__int128>(an) * bd < static_cast<__int128>(bn) * ad;
    }
    friend bool operator>(const Intensity& a, const Intensity& b) { return b < a; }
    friend bool same_ratio(const Intensity& a, const Intensity& b) { return !(a < b) && !(b < a); }
};

/// Vertices ascending by smallest neighbor id, ties by own id; vertices
/// without neighbors go last in id order.
inline std::vector<index_t> sort_by_min_neighbor(const Graph& g) {
    constexpr index_t kNone = std::numeric_limits<index_t>::max();
    std::vector<index_t> key(static_cast<std::size_t>(g.num_vertices));
    for (index_t v = 0; v < g.num_vertices; ++v)
        key[v] = g.degree(v) == 0 ? kNone : g.neighbors(v).front();
    std::vector<index_t> order(static_cast<std::size_t>(g.num_vertices));
    std::iota(order.begin(), order.end(), index_t{0});
    std::ranges::stable_sort(order, [&](index_t a, index_t b) { return key[a] < key[b]; });
    return order;
}

/// Ordered 16-vertex groups; group concatenation order defines new ids.
struct WindowGrouping {
    std::vector<std::vector<index_t>> groups;
    std::vector<index_t> induced_perm;  // old id -> new id

    static WindowGrouping from_groups(std::vector<std::vector<index_t>> groups, index_t n) {
        WindowGrouping out;
        out.groups = std::move(groups);
        out.induced_perm.assign(static_cast<std::size_t>(n), -1);
        index_t next = 0;
        for (const auto& grp : out.groups) {
            for (index_t v : grp) {
                detail::require(v >= 0 && v < n, "grouping: vertex id out of range");
                detail::require(out.induced_perm[v] < 0,
                                "grouping: vertex " + std::to_string(v) + " appears twice");
                out.induced_perm[v] = next++;
            }
        }
        detail::require(next == n, "grouping: covers " + std::to_string(next) + " of " +
                                       std::to_string(n) + " vertices");
        return out;
    }

    static WindowGrouping identity(index_t n, index_t height = kWindowHeight) {
        std::vector<std::vector<index_t>> groups;
        for (index_t v = 0; v < n; ++v) {
            if (v % height == 0) groups.emplace_back();
            groups.back().push_back(v);
        }
        return from_groups(std::move(groups), n);
    }

    friend bool operator==(const WindowGrouping&, const WindowGrouping&) = default;
};

/// Working state of the optimized greedy while one window is being grown.
struct LoaState {
    std::vector<index_t> so_list;
    std::vector<index_t> sorted_pos;  // inverse of so_list
    std::vector<char> visited;
    std::vector<index_t> window;  // vertices accepted so far (RW)
    std::vector<char> in_cols;    // membership flags for all_cols
    std::vector<index_t> all_cols;
    std::vector<index_t> resi;  // columns contributed by the last accepted vertex
    std::vector<index_t> cns;   // cns[v] = |N(v) ∩ all_cols| at iteration boundaries
    index_t cur_eles = 0;
    index_t cur_cols = 0;
    std::vector<index_t> candidates;  // vertices scanned in the current iteration

    explicit LoaState(index_t n = 0)
        : visited(static_cast<std::size_t>(n), 0),
          in_cols(static_cast<std::size_t>(n), 0),
          cns(static_cast<std::size_t>(n), 0) {}
};

/// Intensity of the current window extended by candidate v, from counters:
/// (cur_eles + |N(v)|) / (cur_cols + |N(v)| - cns[v]).
inline Intensity ci_candidate_exact(const Graph& g, const LoaState& s, index_t v) {
    const index_t deg = g.degree(v);
    return {s.cur_eles + deg, s.cur_cols + deg - s.cns[v]};
}

inline double ci_candidate(const Graph& g, const LoaState& s, index_t v) {
    return ci_candidate_exact(g, s, v).value();
}

/// Intensity of a vertex set by explicit neighbor-set union.
inline Intensity ci_union(const Graph& g, std::span<const index_t> vertices) {
    std::vector<index_t> cols;
    index_t elements = 0;
    for (index_t u : vertices) {
        const auto nb = g.neighbors(u);
        elements += static_cast<index_t>(nb.size());
        cols.insert(cols.end(), nb.begin(), nb.end());
    }
    std::ranges::sort(cols);
    const auto dup = std::ranges::unique(cols);
    return {elements, static_cast<index_t>(dup.begin() - cols.begin())};
}

using LoaObserver = std::function<void(const Graph&, const LoaState&)>;

struct LoaOptions {
    index_t vw = 128;
    index_t window_height = kWindowHeight;
    bool verify_counters = kDebugBuild;  // brute-force cns check over the scan range
    LoaObserver observer;                // called at every iteration boundary
};

namespace detail {

// Doubly linked list over sorted positions that are still unvisited.
class UnvisitedList {
public:
    explicit UnvisitedList(index_t n)
        : next_(static_cast<std::size_t>(n) + 1), prev_(static_cast<std::size_t>(n) + 1), n_(n) {
        // Node n is the sentinel.
        for (index_t i = 0; i <= n; ++i) {
            next_[i] = i == n ? (n == 0 ? n : 0) : i + 1;
            prev_[i] = i == 0 ? n : i - 1;
        }
    }
    index_t first() const { return next_[n_]; }
    index_t next(index_t pos) const { return next_[pos]; }
    bool end(index_t pos) const { return pos == n_; }
    void remove(index_t pos) {
        next_[prev_[pos]] = next_[pos];
        prev_[next_[pos]] = prev_[pos];
    }

private:
    std::vector<index_t> next_, prev_;
    index_t n_;
};

inline void require_undirected(const Graph& g) {
    require(g.undirected && is_pattern_symmetric(g.adjacency),
            "loa: graph must be undirected (symmetric adjacency)");
}

/// Up to `vw` unvisited vertices in sorted order.
inline void scan_candidates(const UnvisitedList& list, const std::vector<index_t>& so_list,
                            index_t vw, std::vector<index_t>& out) {
    out.clear();
    for (index_t pos = list.first(); !list.end(pos) && static_cast<index_t>(out.size()) < vw;
         pos = list.next(pos))
        out.push_back(so_list[pos]);
}

/// Tie-break chain: higher intensity, then higher degree, then earlier in
/// sorted order (candidates arrive in sorted order, so first wins).
inline bool better(const Intensity& p, index_t deg, const Intensity& best_p, index_t best_deg) {
    if (p > best_p) return true;
    if (best_p > p) return false;
    return deg > best_deg;
}

}  // namespace detail

/// Reference greedy: each candidate's intensity comes from an explicit
/// union of the window's neighbor sets with N(v).
inline WindowGrouping build_windows_basic(const Graph& g, index_t vw,
                                          index_t window_height = kWindowHeight) {
    detail::require(vw >= 1, "loa: vw must be >= 1");
    detail::require(window_height >= 1, "loa: window_height must be >= 1");
    detail::require_undirected(g);
    const index_t n = g.num_vertices;
    const auto so_list = sort_by_min_neighbor(g);
    std::vector<index_t> pos_of(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) pos_of[so_list[i]] = i;

    detail::UnvisitedList list(n);
    std::vector<std::vector<index_t>> groups;
    std::vector<char> mark(static_cast<std::size_t>(n), 0);
    std::vector<index_t> candidates, union_cols;
    while (!list.end(list.first())) {
        const index_t seed = so_list[list.first()];
        list.remove(pos_of[seed]);
        std::vector<index_t> rw{seed};
        for (index_t it = 1; it < window_height; ++it) {
            detail::scan_candidates(list, so_list, vw, candidates);
            if (candidates.empty()) break;

            // Union of the window's neighbor sets, rebuilt from scratch.
            union_cols.clear();
            index_t elements = 0;
            for (index_t u : rw) {
                elements += g.degree(u);
                for (index_t c : g.neighbors(u))
                    if (!mark[c]) {
                        mark[c] = 1;
                        union_cols.push_back(c);
                    }
            }
            index_t best = -1, best_deg = -1;
            Intensity best_p{0, 0};
            for (index_t v : candidates) {
                index_t extra = 0;
                for (index_t c : g.neighbors(v)) extra += !mark[c];
                const Intensity p{elements + g.degree(v),
                                  static_cast<index_t>(union_cols.size()) + extra};
                if (best < 0 || detail::better(p, g.degree(v), best_p, best_deg)) {
                    best = v;
                    best_p = p;
                    best_deg = g.degree(v);
                }
            }
            for (index_t c : union_cols) mark[c] = 0;
            rw.push_back(best);
            list.remove(pos_of[best]);
        }
        groups.push_back(std::move(rw));
    }
    return WindowGrouping::from_groups(std::move(groups), n);
}

/// Production greedy with incremental intersection counters. Produces the
/// same grouping as build_windows_basic.
inline WindowGrouping build_windows_optimized(const Graph& g, const LoaOptions& opt = {}) {
    detail::require(opt.vw >= 1, "loa: vw must be >= 1");
    detail::require(opt.window_height >= 1, "loa: window_height must be >= 1");
    detail::require_undirected(g);
    const index_t n = g.num_vertices;

    LoaState s(n);
    s.so_list = sort_by_min_neighbor(g);
    s.sorted_pos.resize(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) s.sorted_pos[s.so_list[i]] = i;

    detail::UnvisitedList list(n);
    std::vector<std::vector<index_t>> groups;
    std::vector<index_t> touched;  // vertices whose cns became non-zero this window

    auto accept = [&](index_t v) {
        s.visited[v] = 1;
        list.remove(s.sorted_pos[v]);
        s.window.push_back(v);
        s.resi.clear();
        for (index_t c : g.neighbors(v))
            if (!s.in_cols[c]) {
                s.in_cols[c] = 1;
                s.resi.push_back(c);
                s.all_cols.push_back(c);
            }
        s.cur_eles += g.degree(v);
        s.cur_cols = static_cast<index_t>(s.all_cols.size());
    };

    while (!list.end(list.first())) {
        accept(s.so_list[list.first()]);
        for (index_t it = 1; it < opt.window_height; ++it) {
            // Fold the newly added columns into the counters.
            for (index_t u : s.resi)
                for (index_t w : g.neighbors(u)) {
                    if (s.cns[w]++ == 0) touched.push_back(w);
                }
            s.resi.clear();

            detail::scan_candidates(list, s.so_list, opt.vw, s.candidates);
            if (opt.verify_counters) {
                for (index_t v : s.candidates) {
                    index_t brute = 0;
                    for (index_t c : g.neighbors(v)) brute += s.in_cols[c];
                    detail::ensure(s.cns[v] == brute,
                                   "loa: cns counter mismatch at vertex " + std::to_string(v));
                }
            }
            if (opt.observer) opt.observer(g, s);
            if (s.candidates.empty()) break;

            index_t best = -1, best_deg = -1;
            Intensity best_p{0, 0};
            for (index_t v : s.candidates) {
                const auto p = ci_candidate_exact(g, s, v);
                if (best < 0 || detail::better(p, g.degree(v), best_p, best_deg)) {
                    best = v;
                    best_p = p;
                    best_deg = g.degree(v);
                }
            }
            accept(best);
        }
        groups.push_back(std::move(s.window));
        s.window.clear();
        for (index_t w : touched) s.cns[w] = 0;
        touched.clear();
        for (index_t c : s.all_cols) s.in_cols[c] = 0;
        s.all_cols.clear();
        s.resi.clear();
        s.cur_eles = 0;
        s.cur_cols = 0;
    }
    return WindowGrouping::from_groups(std::move(groups), n);
}

inline WindowGrouping build_windows_optimized(const Graph& g, index_t vw) {
    LoaOptions opt;
    opt.vw = vw;
    return build_windows_optimized(g, opt);
}

struct Reordered {
    Graph graph;
    std::vector<index_t> perm;  // old id -> new id
};

/// Symmetric relabeling of the graph by group concatenation order.
inline Reordered reorder(const Graph& g, const WindowGrouping& grouping) {
    detail::require(is_permutation(grouping.induced_perm, g.num_vertices),
                    "reorder: grouping does not cover every vertex exactly once");
    return {Graph(permute_symmetric(g.adjacency, grouping.induced_perm), g.undirected),
            grouping.induced_perm};
}

}  // namespace hcspmm

#endif
