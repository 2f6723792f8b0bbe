#ifndef HCSPMM_IO_HPP
#define HCSPMM_IO_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "matrix.hpp"

namespace hcspmm {

enum class MmField { Real, Pattern };
enum class MmSymmetry { General, Symmetric };

struct MatrixMarketFile {
    SparseCsr<double> matrix;
    MmField field = MmField::Real;
    MmSymmetry symmetry = MmSymmetry::General;
};

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::vector<std::string_view> split_fields(std::string_view line, bool allow_comma) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    auto is_sep = [&](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || (allow_comma && c == ',');
    };
    while (i < line.size()) {
        while (i < line.size() && is_sep(line[i])) ++i;
        std::size_t j = i;
        while (j < line.size() && !is_sep(line[j])) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename Num>
bool parse_number(std::string_view tok, Num& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line,
                                    const std::string& what) {
    throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

/// Parses Matrix Market coordinate data. Symmetric files are expanded to both
/// triangles, pattern entries get value 1.0 and duplicates are summed.
inline MatrixMarketFile read_matrix_market(std::istream& in,
                                           const std::string& source = "<stream>") {
    using detail::parse_fail;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) parse_fail(source, 1, "empty file");
    ++line_no;
    const std::string header_line = detail::lower(line);
    const auto header = detail::split_fields(header_line, false);
    if (header.size() != 5 || header[0] != "%%matrixmarket" || header[1] != "matrix" ||
        header[2] != "coordinate")
        parse_fail(source, line_no, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'");

    MatrixMarketFile file;
    if (header[3] == "real" || header[3] == "integer" || header[3] == "double")
        file.field = MmField::Real;
    else if (header[3] == "pattern")
        file.field = MmField::Pattern;
    else
        parse_fail(source, line_no, "unsupported field '" + std::string(header[3]) + "'");
    if (header[4] == "general")
        file.symmetry = MmSymmetry::General;
    else if (header[4] == "symmetric")
        file.symmetry = MmSymmetry::Symmetric;
    else
        parse_fail(source, line_no, "unsupported symmetry '" + std::string(header[4]) + "'");

    index_t rows = -1, cols = -1, declared = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '%') continue;
        const auto f = detail::split_fields(line, false);
        if (f.empty()) continue;
        if (f.size() != 3 || !detail::parse_number(f[0], rows) ||
            !detail::parse_number(f[1], cols) || !detail::parse_number(f[2], declared) ||
            rows < 0 || cols < 0 || declared < 0)
            parse_fail(source, line_no, "malformed size line");
        break;
    }
    if (rows < 0) parse_fail(source, line_no, "missing size line");
    if (file.symmetry == MmSymmetry::Symmetric && rows != cols)
        parse_fail(source, line_no, "symmetric matrix must be square");

    std::vector<Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(declared) *
                    (file.symmetry == MmSymmetry::Symmetric ? 2 : 1));
    index_t seen = 0;
    const std::size_t expected_fields = file.field == MmField::Pattern ? 2 : 3;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '%') continue;
        const auto f = detail::split_fields(line, false);
        if (f.empty()) continue;
        if (seen == declared) parse_fail(source, line_no, "more entries than declared");
        index_t i = 0, j = 0;
        double v = 1.0;
        if (f.size() != expected_fields || !detail::parse_number(f[0], i) ||
            !detail::parse_number(f[1], j) ||
            (expected_fields == 3 && !detail::parse_number(f[2], v)))
            parse_fail(source, line_no, "malformed entry");
        if (i < 1 || i > rows || j < 1 || j > cols)
            parse_fail(source, line_no,
                       "index (" + std::to_string(i) + "," + std::to_string(j) +
                           ") out of declared bounds " + std::to_string(rows) + "x" +
                           std::to_string(cols));
        entries.push_back({i - 1, j - 1, v});
        if (file.symmetry == MmSymmetry::Symmetric && i != j) entries.push_back({j - 1, i - 1, v});
        ++seen;
    }
    if (seen != declared)
        parse_fail(source, line_no,
                   "expected " + std::to_string(declared) + " entries, found " +
                       std::to_string(seen));

    file.matrix = csr_from_triplets<double>(rows, cols, std::move(entries));
    return file;
}

inline MatrixMarketFile read_matrix_market_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_matrix_market(in, path);
}

inline SparseCsr<double> load_matrix_market(const std::string& path) {
    return read_matrix_market_file(path).matrix;
}

/// Writes the general (fully expanded) coordinate form, 1-based indices.
inline void write_matrix_market(std::ostream& out, const SparseCsr<double>& a,
                                MmField field = MmField::Real) {
    out << "%%MatrixMarket matrix coordinate "
        << (field == MmField::Pattern ? "pattern" : "real") << " general\n";
    out << a.num_rows << ' ' << a.num_cols << ' ' << a.nnz() << '\n';
    for (index_t r = 0; r < a.num_rows; ++r) {
        for (index_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            out << (r + 1) << ' ' << (a.col_idx[k] + 1);
            if (field == MmField::Real) out << ' ' << detail::format_double(a.values[k]);
            out << '\n';
        }
    }
}

inline void write_matrix_market_file(const std::string& path, const SparseCsr<double>& a,
                                     MmField field = MmField::Real) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_matrix_market(out, a, field);
}

struct EdgeListFile {
    Graph graph;
    int index_base = 0;  // detected from the minimum vertex id
    index_t edges_read = 0;
};

/// Reads "src dst" pairs separated by whitespace or commas. Lines starting
/// with '#' or '%' are comments. Duplicate edges collapse to one entry.
inline EdgeListFile read_edge_list(std::istream& in, bool undirected,
                                   const std::string& source = "<stream>") {
    std::vector<std::pair<index_t, index_t>> edges;
    std::string line;
    std::size_t line_no = 0;
    index_t min_id = 0, max_id = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = detail::split_fields(line, true);
        if (f.empty() || f[0].front() == '#' || f[0].front() == '%') continue;
        if (f.size() != 2) detail::parse_fail(source, line_no, "expected two vertex ids");
        index_t u = 0, v = 0;
        for (int k = 0; k < 2; ++k) {
            index_t& dst = k == 0 ? u : v;
            if (!detail::parse_number(f[k], dst))
                detail::parse_fail(source, line_no,
                                   "non-integer token '" + std::string(f[k]) + "'");
            if (dst < 0) detail::parse_fail(source, line_no, "negative vertex id");
        }
        if (edges.empty()) min_id = std::min(u, v);
        min_id = std::min({min_id, u, v});
        max_id = std::max({max_id, u, v});
        edges.emplace_back(u, v);
    }
    if (edges.empty()) throw InputError(source + ": empty edge list");

    EdgeListFile file;
    file.index_base = min_id >= 1 ? 1 : 0;
    file.edges_read = static_cast<index_t>(edges.size());
    const index_t n = max_id - file.index_base + 1;
    std::vector<Triplet<double>> entries;
    entries.reserve(edges.size() * (undirected ? 2 : 1));
    for (auto [u, v] : edges) {
        u -= file.index_base;
        v -= file.index_base;
        entries.push_back({u, v, 1.0});
        if (undirected && u != v) entries.push_back({v, u, 1.0});
    }
    auto adj = csr_from_triplets<double>(n, n, std::move(entries));
    std::ranges::fill(adj.values, 1.0);  // dedup, not weighted multigraph
    file.graph = Graph(std::move(adj), undirected);
    return file;
}

inline EdgeListFile load_edge_list_file(const std::string& path, bool undirected) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_edge_list(in, undirected, path);
}

inline Graph load_edge_list(const std::string& path, bool undirected) {
    return load_edge_list_file(path, undirected).graph;
}

/// Interprets a square matrix as a graph; undirected iff its pattern is symmetric.
inline Graph graph_from_matrix(SparseCsr<double> a) {
    detail::require(a.square(), "graph: matrix is not square");
    const bool sym = is_pattern_symmetric(a);
    return Graph(std::move(a), sym);
}

/// Dense CSV: one row per line, comma separated, no header.
template <typename T>
DenseMatrix<T> read_dense_csv(std::istream& in, const std::string& source = "<stream>") {
    std::vector<T> data;
    index_t rows = 0, dim = -1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = detail::split_fields(line, true);
        if (f.empty()) continue;
        if (dim >= 0 && static_cast<index_t>(f.size()) != dim)
            detail::parse_fail(source, line_no, "ragged row");
        dim = static_cast<index_t>(f.size());
        for (auto tok : f) {
            double v = 0;
            if (!detail::parse_number(tok, v))
                detail::parse_fail(source, line_no, "non-numeric token '" + std::string(tok) + "'");
            data.push_back(static_cast<T>(v));
        }
        ++rows;
    }
    if (rows == 0) throw InputError(source + ": empty dense matrix");
    DenseMatrix<T> out(rows, dim);
    out.data = std::move(data);
    return out;
}

template <typename T>
void write_dense_csv(std::ostream& out, const DenseMatrix<T>& x) {
    for (index_t r = 0; r < x.rows; ++r) {
        for (index_t c = 0; c < x.dim; ++c) {
            if (c) out << ',';
            out << detail::format_double(static_cast<double>(x(r, c)));
        }
        out << '\n';
    }
}

}  // namespace hcspmm

#endif
