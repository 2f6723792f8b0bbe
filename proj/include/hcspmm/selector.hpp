#ifndef HCSPMM_SELECTOR_HPP
#define HCSPMM_SELECTOR_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "random.hpp"
#include "spmm.hpp"
#include "timing.hpp"
#include "window.hpp"

namespace hcspmm {

inline constexpr index_t kMaxSyntheticCols = 130;
inline constexpr index_t kMaxDensityNumerator = 15;  // density capped at 15/16

/// A 16-row window over columns 0..ncols-1 holding exactly nnz unit entries.
/// Every column first receives one entry at a uniformly random row; the
/// remaining nnz - ncols entries land on uniformly random free cells.
inline RowWindow<double> generate_synthetic(index_t ncols, index_t nnz, std::uint64_t seed) {
    constexpr index_t H = kWindowHeight;
    detail::require(ncols >= 1 && ncols <= kMaxSyntheticCols,
                    "generate_synthetic: ncols must be in [1, 130]");
    detail::require(nnz <= H * ncols, "generate_synthetic: nnz exceeds 16 * ncols");
    detail::require(nnz >= ncols && nnz <= kMaxDensityNumerator * ncols,
                    "generate_synthetic: nnz must be in [ncols, 15 * ncols]");
    Rng rng(seed);
    std::vector<char> filled(static_cast<std::size_t>(H * ncols), 0);
    std::uniform_int_distribution<index_t> row_dist(0, H - 1);
    for (index_t c = 0; c < ncols; ++c) filled[row_dist(rng) * ncols + c] = 1;

    std::vector<index_t> free_cells;
    free_cells.reserve(filled.size());
    for (index_t cell = 0; cell < H * ncols; ++cell)
        if (!filled[cell]) free_cells.push_back(cell);
    for (index_t i = 0; i < nnz - ncols; ++i) {
        std::uniform_int_distribution<index_t> pick(i, static_cast<index_t>(free_cells.size()) - 1);
        std::swap(free_cells[i], free_cells[pick(rng)]);
        filled[free_cells[i]] = 1;
    }

    std::vector<Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(nnz));
    for (index_t cell = 0; cell < H * ncols; ++cell)
        if (filled[cell]) entries.push_back({cell / ncols, cell % ncols, 1.0});
    const auto csr = csr_from_triplets<double>(H, ncols, std::move(entries));
    return make_window(csr, 0, 0, H);
}

struct GridPoint {
    index_t ncols;
    index_t nnz;
    std::uint64_t seed;
};

namespace detail {

inline std::vector<GridPoint> make_grid(const std::vector<index_t>& ncols_values,
                                        index_t seeds_per_point, std::uint64_t base_seed) {
    std::vector<GridPoint> grid;
    std::uint64_t next_seed = base_seed;
    for (index_t n : ncols_values) {
        for (index_t k = 0; k < 8; ++k) {
            // Densities (2k+1)/16: eight evenly spaced values over [1/16, 15/16].
            const index_t nnz = std::clamp<index_t>(n * (2 * k + 1), n, kMaxDensityNumerator * n);
            for (index_t s = 0; s < seeds_per_point; ++s) grid.push_back({n, nnz, next_seed++});
        }
    }
    return grid;
}

}  // namespace detail

/// ncols in {1, 2, 4, 8, 16, ..., 128, 130} (20 values) × 8 densities × 3 seeds.
inline std::vector<GridPoint> default_training_grid(std::uint64_t base_seed = 42) {
    std::vector<index_t> ncols{1, 2, 4};
    for (index_t n = 8; n <= 128; n += 8) ncols.push_back(n);
    ncols.push_back(kMaxSyntheticCols);
    return detail::make_grid(ncols, 3, base_seed);
}

/// Every ncols in [1, 130] × 8 densities × 5 seeds (5,200 windows).
inline std::vector<GridPoint> full_training_grid(std::uint64_t base_seed = 42) {
    std::vector<index_t> ncols;
    for (index_t n = 1; n <= kMaxSyntheticCols; ++n) ncols.push_back(n);
    return detail::make_grid(ncols, 5, base_seed);
}

struct TrainingSample {
    index_t ncols = 0;
    double density = 0;
    double t_scalar = 0;
    double t_tile = 0;
    int label = 0;  // 1 when the scalar path is strictly faster
};

inline TrainingSample make_sample(const WindowFeatures& f, PathTimes t) {
    return {f.ncols, f.density, t.t_scalar, t.t_tile, t.t_scalar < t.t_tile ? 1 : 0};
}

/// Labels one synthetic window per grid point. Deterministic providers are
/// queried once per window (in parallel when threads > 1); others are
/// queried serially with `repeats` timed runs.
inline std::vector<TrainingSample> collect_samples(const std::vector<GridPoint>& grid,
                                                   TimingProvider& provider, index_t repeats,
                                                   index_t dim = 32, unsigned threads = 1) {
    detail::require(repeats >= 1, "collect_samples: repeats must be >= 1");
    std::vector<TrainingSample> out(grid.size());
    const bool det = provider.deterministic();
    parallel_for(static_cast<index_t>(grid.size()), det ? threads : 1u, [&](index_t i) {
        const auto w = generate_synthetic(grid[i].ncols, grid[i].nnz, grid[i].seed);
        out[i] = make_sample(features(w), provider.measure(w, dim, det ? 1 : repeats));
    });
    return out;
}

/// Linear selector over z-scored (ncols, density); positive score selects
/// the scalar path.
struct SelectorModel {
    double w_ncols = 0;
    double w_density = 0;
    double bias = 0;
    std::array<double, 2> feature_means{0, 0};
    std::array<double, 2> feature_scales{1, 1};

    double score(double ncols, double density) const {
        return w_ncols * (ncols - feature_means[0]) / feature_scales[0] +
               w_density * (density - feature_means[1]) / feature_scales[1] + bias;
    }

    /// The same decision function on raw features: w1·ncols + w2·density + b.
    std::array<double, 3> raw_coefficients() const {
        const double w1 = w_ncols / feature_scales[0];
        const double w2 = w_density / feature_scales[1];
        return {w1, w2, bias - w1 * feature_means[0] - w2 * feature_means[1]};
    }

    void validate() const {
        detail::require(feature_scales[0] > 0 && feature_scales[1] > 0,
                        "selector model: feature scales must be > 0");
    }

    friend bool operator==(const SelectorModel&, const SelectorModel&) = default;
};

inline Path classify_raw(const SelectorModel& m, double ncols, double density) {
    return m.score(ncols, density) > 0 ? Path::Scalar : Path::Tile;
}

/// Empty windows always map to the scalar path (executors skip them).
inline Path classify(const SelectorModel& m, const WindowFeatures& f) {
    if (f.ncols == 0) return Path::Scalar;
    return classify_raw(m, static_cast<double>(f.ncols), f.density);
}

template <typename T>
Assignment classify(const SelectorModel& m, const Partition<T>& p) {
    Assignment a;
    a.reserve(p.size());
    for (const auto& w : p) a.push_back(classify(m, features(w)));
    return a;
}

struct TrainOptions {
    double learning_rate = 0.1;
    index_t epochs = 50000;
    double tolerance = 1e-8;  // stop when |loss change| falls below this
    std::uint64_t seed = 42;  // initial weights ~ N(0, 0.01)
};

struct TrainResult {
    SelectorModel model;
    index_t epochs_run = 0;
    double final_loss = 0;
};

/// Full-batch gradient descent on mean cross-entropy over z-scored features.
inline TrainResult train_logistic(const std::vector<std::array<double, 2>>& x,
                                  const std::vector<int>& y, const TrainOptions& opt = {}) {
    detail::require(x.size() == y.size(), "train: feature/label length mismatch");
    detail::require(x.size() >= 2, "train: need at least 2 samples");
    std::size_t positives = 0;
    for (int label : y) positives += label == 1;
    detail::require(positives > 0 && positives < y.size(),
                    "train: samples contain a single class (" + std::to_string(positives) + " of " +
                        std::to_string(y.size()) + " labeled scalar-faster); cannot fit");
    detail::require(opt.learning_rate > 0 && opt.epochs >= 1, "train: bad optimizer options");

    const auto n = static_cast<double>(x.size());
    TrainResult res;
    auto& m = res.model;
    for (int f = 0; f < 2; ++f) {
        double mean = 0, var = 0;
        for (const auto& s : x) mean += s[f];
        mean /= n;
        for (const auto& s : x) var += (s[f] - mean) * (s[f] - mean);
        const double sd = std::sqrt(var / n);
        m.feature_means[f] = mean;
        m.feature_scales[f] = sd > 0 ? sd : 1.0;
    }
    std::vector<std::array<double, 2>> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (int f = 0; f < 2; ++f) z[i][f] = (x[i][f] - m.feature_means[f]) / m.feature_scales[f];

    Rng rng(opt.seed);
    std::normal_distribution<double> init(0.0, 0.01);
    double w0 = init(rng), w1 = init(rng), b = 0;

    auto softplus = [](double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); };
    double prev_loss = std::numeric_limits<double>::infinity();
    for (res.epochs_run = 0; res.epochs_run < opt.epochs; ++res.epochs_run) {
        double g0 = 0, g1 = 0, gb = 0, loss = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double s = w0 * z[i][0] + w1 * z[i][1] + b;
            const double p = 1.0 / (1.0 + std::exp(-s));
            const double err = p - y[i];
            g0 += err * z[i][0];
            g1 += err * z[i][1];
            gb += err;
            loss += y[i] ? softplus(-s) : softplus(s);
        }
        loss /= n;
        res.final_loss = loss;
        if (std::abs(prev_loss - loss) < opt.tolerance) break;
        prev_loss = loss;
        w0 -= opt.learning_rate * g0 / n;
        w1 -= opt.learning_rate * g1 / n;
        b -= opt.learning_rate * gb / n;
    }
    m.w_ncols = w0;
    m.w_density = w1;
    m.bias = b;
    return res;
}

inline TrainResult train(const std::vector<TrainingSample>& samples, const TrainOptions& opt = {}) {
    std::vector<std::array<double, 2>> x;
    std::vector<int> y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const auto& s : samples) {
        x.push_back({static_cast<double>(s.ncols), s.density});
        y.push_back(s.label);
    }
    return train_logistic(x, y, opt);
}

/// Fraction of samples whose label matches the model's path choice.
inline double accuracy(const SelectorModel& m, const std::vector<TrainingSample>& samples) {
    if (samples.empty()) return 0;
    std::size_t hits = 0;
    for (const auto& s : samples) {
        const bool scalar = classify_raw(m, static_cast<double>(s.ncols), s.density) == Path::Scalar;
        hits += scalar == (s.label == 1);
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

/// Model JSON stores every value as a 17-significant-digit decimal string.
inline nlohmann::ordered_json model_to_json(const SelectorModel& m) {
    using detail::format_double;
    nlohmann::ordered_json j;
    j["w_ncols"] = format_double(m.w_ncols);
    j["w_density"] = format_double(m.w_density);
    j["bias"] = format_double(m.bias);
    j["feature_means"] = {format_double(m.feature_means[0]), format_double(m.feature_means[1])};
    j["feature_scales"] = {format_double(m.feature_scales[0]), format_double(m.feature_scales[1])};
    return j;
}

namespace detail {

inline double json_decimal(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    double out = 0;
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (parse_number(std::string_view(s), out)) return out;
    }
    throw InputError("selector model: field '" + key + "' is not a decimal number");
}

}  // namespace detail

inline SelectorModel model_from_json(const nlohmann::json& j) {
    auto field = [&](const char* key) -> const nlohmann::json& {
        if (!j.is_object() || !j.contains(key))
            throw InputError(std::string("selector model: missing field '") + key + "'");
        return j.at(key);
    };
    auto pair = [&](const char* key) {
        const auto& v = field(key);
        if (!v.is_array() || v.size() != 2)
            throw InputError(std::string("selector model: field '") + key +
                             "' must be a 2-element array");
        return std::array<double, 2>{detail::json_decimal(v[0], key),
                                     detail::json_decimal(v[1], key)};
    };
    SelectorModel m;
    m.w_ncols = detail::json_decimal(field("w_ncols"), "w_ncols");
    m.w_density = detail::json_decimal(field("w_density"), "w_density");
    m.bias = detail::json_decimal(field("bias"), "bias");
    m.feature_means = pair("feature_means");
    m.feature_scales = pair("feature_scales");
    m.validate();
    return m;
}

inline void save_model(const SelectorModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model file '" + path + "'");
    out << model_to_json(m).dump(2) << '\n';
}

inline SelectorModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

/// The model used when none is supplied: trained on the default grid with
/// labels from the default analytic cost model.
inline SelectorModel default_model(const CostParams& params = CostParams::defaults(),
                                   index_t dim = 32) {
    AnalyticProvider provider(params);
    const auto samples = collect_samples(default_training_grid(), provider, 1, dim);
    return train(samples).model;
}

}  // namespace hcspmm

#endif
