#ifndef HCSPMM_COST_MODEL_HPP
#define HCSPMM_COST_MODEL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "window.hpp"

namespace hcspmm {

/// Per-window analytic cost of the two execution paths, in seconds.
///
///   scalar: alpha_scalar + beta_scalar · nnz · dim
///   tile:   alpha_tile + beta_tile · ceil(ncols/8) · ceil(dim/16)
///                      + gamma_tile · ncols · ceil(dim/16)
///
/// The scalar path pays per stored entry and dense column; the tile path
/// pays per 16×8×16 block product plus one X-row load per non-zero column
/// and dense-column block, independent of how many entries the tile holds.
struct CostParams {
    double alpha_scalar = 0;
    double beta_scalar = 0;
    double alpha_tile = 0;
    double beta_tile = 0;
    double gamma_tile = 0;

    /// Shipped defaults; mirrored by config/default_cost_params.json.
    static CostParams defaults() { return {4.0e-8, 2.8e-11, 2.0e-8, 4.0e-9, 1.0e-9}; }

    void validate() const {
        detail::require(alpha_scalar >= 0 && beta_scalar >= 0 && alpha_tile >= 0 &&
                            beta_tile >= 0 && gamma_tile >= 0,
                        "cost params: all parameters must be >= 0");
        detail::require(gamma_tile > 0, "cost params: gamma_tile must be > 0");
    }

    friend bool operator==(const CostParams&, const CostParams&) = default;
};

inline double estimate_scalar(const WindowFeatures& f, index_t dim, const CostParams& p) {
    return p.alpha_scalar +
           p.beta_scalar * static_cast<double>(f.nnz) * static_cast<double>(dim);
}

inline double estimate_tile(const WindowFeatures& f, index_t dim, const CostParams& p) {
    const auto dim_blocks = static_cast<double>(detail::ceil_div(dim, kDimTile));
    const auto col_blocks = static_cast<double>(tile_count(f.ncols));
    return p.alpha_tile + col_blocks * dim_blocks * p.beta_tile +
           static_cast<double>(f.ncols) * dim_blocks * p.gamma_tile;
}

/// Memory-over-compute check for the tile path: X-row loads must cost more
/// than block products for a window with `ncols` non-zero columns.
inline bool tile_memory_dominates(const CostParams& p, index_t ncols = 32, index_t dim = 32) {
    const auto dim_blocks = static_cast<double>(detail::ceil_div(dim, kDimTile));
    return p.gamma_tile * static_cast<double>(ncols) * dim_blocks >
           p.beta_tile * static_cast<double>(tile_count(ncols)) * dim_blocks;
}

/// Density at which the two estimates meet for a full-height window, or
/// nullopt when the scalar estimate has no nnz dependence.
inline std::optional<double> crossover_density(index_t ncols, index_t dim, const CostParams& p) {
    if (ncols <= 0 || p.beta_scalar <= 0 || dim <= 0) return std::nullopt;
    const double tile = estimate_tile(WindowFeatures::from_counts(0, ncols), dim, p);
    const double nnz = (tile - p.alpha_scalar) / (p.beta_scalar * static_cast<double>(dim));
    return nnz / static_cast<double>(kWindowHeight * ncols);
}

struct CalibrationSample {
    WindowFeatures features;
    index_t dim = 32;
    std::optional<double> t_scalar;
    std::optional<double> t_tile;
};

struct CalibrationResult {
    CostParams params;
    double r2_scalar = 0;
    double r2_tile = 0;
    std::size_t samples_scalar = 0;
    std::size_t samples_tile = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> scalar_design(const CalibrationSample& s) {
    return {1.0, static_cast<double>(s.features.nnz) * static_cast<double>(s.dim)};
}

inline std::vector<double> tile_design(const CalibrationSample& s) {
    const auto dim_blocks = static_cast<double>(ceil_div(s.dim, kDimTile));
    return {1.0, static_cast<double>(tile_count(s.features.ncols)) * dim_blocks,
            static_cast<double>(s.features.ncols) * dim_blocks};
}

/// Least squares on column-scaled design; throws on rank deficiency.
inline Eigen::VectorXd fit_linear(const std::vector<std::vector<double>>& rows,
                                  const std::vector<double>& y, const std::string& path) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto k = static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) a(i, j) = rows[i][j];
        b(i) = y[i];
    }
    Eigen::VectorXd scale = a.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < k; ++j)
        if (scale(j) == 0) scale(j) = 1;
    a = a * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    require(qr.rank() == k, "calibrate: rank-deficient design for the " + path +
                                " path (samples do not vary enough)");
    return qr.solve(b).cwiseQuotient(scale);
}

inline double r_squared(const std::vector<double>& y, const std::vector<double>& pred) {
    double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - pred[i]) * (y[i] - pred[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
}

}  // namespace detail

/// Coefficient of determination of `p` against the samples of each path.
inline std::pair<double, double> calibration_r2(const CostParams& p,
                                                const std::vector<CalibrationSample>& samples) {
    std::vector<double> ys, ps, yt, pt;
    for (const auto& s : samples) {
        if (s.t_scalar) {
            ys.push_back(*s.t_scalar);
            ps.push_back(estimate_scalar(s.features, s.dim, p));
        }
        if (s.t_tile) {
            yt.push_back(*s.t_tile);
            pt.push_back(estimate_tile(s.features, s.dim, p));
        }
    }
    return {ys.empty() ? 0.0 : detail::r_squared(ys, ps),
            yt.empty() ? 0.0 : detail::r_squared(yt, pt)};
}

/// Fits both path models by least squares. Negative coefficients are clamped
/// to zero; a non-positive gamma_tile is raised to a 1e-15 s floor. Either
/// adjustment, and a tile path where loads do not dominate, adds a warning.
inline CalibrationResult calibrate(const std::vector<CalibrationSample>& samples) {
    std::vector<std::vector<double>> xs, xt;
    std::vector<double> ys, yt;
    std::set<std::vector<double>> distinct_s, distinct_t;
    for (const auto& s : samples) {
        if (s.t_scalar) {
            xs.push_back(detail::scalar_design(s));
            ys.push_back(*s.t_scalar);
            distinct_s.insert(xs.back());
        }
        if (s.t_tile) {
            xt.push_back(detail::tile_design(s));
            yt.push_back(*s.t_tile);
            distinct_t.insert(xt.back());
        }
    }
    detail::require(distinct_s.size() >= 3, "calibrate: need >= 3 distinct scalar-path samples");
    detail::require(distinct_t.size() >= 3, "calibrate: need >= 3 distinct tile-path samples");

    const auto cs = detail::fit_linear(xs, ys, "scalar");
    const auto ct = detail::fit_linear(xt, yt, "tile");

    CalibrationResult out;
    out.samples_scalar = ys.size();
    out.samples_tile = yt.size();
    auto clamp = [&](double v, const char* name) {
        if (v < 0) {
            out.warnings.push_back(std::string(name) + " fitted negative (" +
                                   detail::format_double(v) + "), clamped to 0");
            return 0.0;
        }
        return v;
    };
    out.params.alpha_scalar = clamp(cs(0), "alpha_scalar");
    out.params.beta_scalar = clamp(cs(1), "beta_scalar");
    out.params.alpha_tile = clamp(ct(0), "alpha_tile");
    out.params.beta_tile = clamp(ct(1), "beta_tile");
    out.params.gamma_tile = clamp(ct(2), "gamma_tile");
    if (out.params.gamma_tile <= 0) {
        out.params.gamma_tile = 1e-15;
        out.warnings.push_back("gamma_tile raised to 1e-15 s floor");
    }
    if (!tile_memory_dominates(out.params))
        out.warnings.push_back(
            "tile path: X-row load cost does not exceed block product cost at ncols=32, dim=32");
    std::tie(out.r2_scalar, out.r2_tile) = calibration_r2(out.params, samples);
    return out;
}

struct CostProvenance {
    std::string provider = "reference";
    std::string date;
    index_t sample_count = 0;
};

struct CostParamsFile {
    static constexpr int kVersion = 1;
    CostParams params;
    CostProvenance provenance;
    int version = kVersion;
};

inline nlohmann::ordered_json to_json(const CostParamsFile& f) {
    nlohmann::ordered_json j;
    j["version"] = f.version;
    j["alpha_scalar"] = f.params.alpha_scalar;
    j["beta_scalar"] = f.params.beta_scalar;
    j["alpha_tile"] = f.params.alpha_tile;
    j["beta_tile"] = f.params.beta_tile;
    j["gamma_tile"] = f.params.gamma_tile;
    j["provenance"] = {{"provider", f.provenance.provider},
                       {"date", f.provenance.date},
                       {"sample_count", f.provenance.sample_count}};
    return j;
}

inline CostParamsFile cost_params_from_json(const nlohmann::json& j) {
    CostParamsFile f;
    auto get = [&](const char* key) {
        detail::require(j.contains(key) && j.at(key).is_number(),
                        std::string("params file: missing numeric field '") + key + "'");
        return j.at(key).get<double>();
    };
    f.params = {get("alpha_scalar"), get("beta_scalar"), get("alpha_tile"), get("beta_tile"),
                get("gamma_tile")};
    f.version = j.value("version", CostParamsFile::kVersion);
    if (j.contains("provenance")) {
        const auto& p = j.at("provenance");
        f.provenance.provider = p.value("provider", "");
        f.provenance.date = p.value("date", "");
        f.provenance.sample_count = p.value("sample_count", index_t{0});
    }
    f.params.validate();
    return f;
}

inline CostParamsFile load_cost_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open params file '" + path + "'");
    try {
        return cost_params_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("params file '" + path + "': " + e.what());
    }
}

inline void save_cost_params(const std::string& path, const CostParamsFile& f) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write params file '" + path + "'");
    out << to_json(f).dump(2) << '\n';
}

struct SweepPoint {
    index_t ncols;
    index_t nnz;
    double density;
    double t_scalar;
    double t_tile;
};

/// Estimates along density for a fixed column count: nnz = k·ncols, k = 1..15.
inline std::vector<SweepPoint> sweep_density(index_t ncols, index_t dim, const CostParams& p) {
    std::vector<SweepPoint> out;
    for (index_t k = 1; k <= 15; ++k) {
        const auto f = WindowFeatures::from_counts(k * ncols, ncols);
        out.push_back({ncols, f.nnz, f.density, estimate_scalar(f, dim, p), estimate_tile(f, dim, p)});
    }
    return out;
}

/// Estimates along ncols at a fixed entry count (columns from ceil(nnz/16) to nnz, capped at 130).
inline std::vector<SweepPoint> sweep_ncols(index_t nnz, index_t dim, const CostParams& p) {
    std::vector<SweepPoint> out;
    for (index_t c = std::max<index_t>(1, detail::ceil_div(nnz, kWindowHeight));
         c <= std::min<index_t>(nnz, 130); ++c) {
        const auto f = WindowFeatures::from_counts(nnz, c);
        out.push_back({c, nnz, f.density, estimate_scalar(f, dim, p), estimate_tile(f, dim, p)});
    }
    return out;
}

}  // namespace hcspmm

#endif
