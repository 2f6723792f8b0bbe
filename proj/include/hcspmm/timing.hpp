#ifndef HCSPMM_TIMING_HPP
#define HCSPMM_TIMING_HPP

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "cost_model.hpp"
#include "io.hpp"
#include "random.hpp"
#include "spmm.hpp"

namespace hcspmm {

struct PathTimes {
    double t_scalar = 0;
    double t_tile = 0;
};

/// Source of per-window (scalar, tile) costs used to label training data.
class TimingProvider {
public:
    virtual ~TimingProvider() = default;
    virtual PathTimes measure(const RowWindow<double>& w, index_t dim, index_t repeats) = 0;
    virtual std::string name() const = 0;
    virtual bool deterministic() const { return false; }
};

class AnalyticProvider final : public TimingProvider {
public:
    explicit AnalyticProvider(CostParams params = CostParams::defaults()) : params_(params) {
        params_.validate();
    }
    PathTimes measure(const RowWindow<double>& w, index_t dim, index_t) override {
        const auto f = features(w);
        return {estimate_scalar(f, dim, params_), estimate_tile(f, dim, params_)};
    }
    std::string name() const override { return "cost-model"; }
    bool deterministic() const override { return true; }
    const CostParams& params() const { return params_; }

private:
    CostParams params_;
};

/// Lower bound reported for any measured time, in seconds.
inline constexpr double kMeasurementFloor = 1e-9;

/// Wall-clock mean over `repeats` runs of each reference kernel on a single
/// window (rebased to row 0) against a seeded random X. One warm-up run per
/// path is excluded. Serial by construction.
inline PathTimes measured_cpu_times(const RowWindow<double>& w, index_t dim, index_t repeats,
                                    std::uint64_t seed = 42) {
    detail::require(repeats >= 1, "measured provider: repeats must be >= 1");
    const index_t x_rows = w.nonzero_cols.empty() ? 1 : w.nonzero_cols.back() + 1;
    Rng rng(seed);
    const auto x = random_dense<double>(x_rows, dim, rng);
    std::vector<double> out(static_cast<std::size_t>(w.row_count * dim));
    const std::span<const index_t> cols(w.nonzero_cols);

    auto time_path = [&](Path path) {
        std::fill(out.begin(), out.end(), 0.0);
        kernels::run_window(path, w, x, cols, std::span<double>(out));
        // One batch: per-call clock reads would swamp sub-microsecond kernels.
        const auto t0 = std::chrono::steady_clock::now();
        for (index_t i = 0; i < repeats; ++i)
            kernels::run_window(path, w, x, cols, std::span<double>(out));
        const auto t1 = std::chrono::steady_clock::now();
        const double total = std::chrono::duration<double>(t1 - t0).count();
        return std::max(kMeasurementFloor, total / static_cast<double>(repeats));
    };
    PathTimes t;
    t.t_scalar = time_path(Path::Scalar);
    t.t_tile = time_path(Path::Tile);
    return t;
}

class MeasuredCpuProvider final : public TimingProvider {
public:
    explicit MeasuredCpuProvider(std::uint64_t seed = 42) : seed_(seed) {}
    PathTimes measure(const RowWindow<double>& w, index_t dim, index_t repeats) override {
        return measured_cpu_times(w, dim, repeats, seed_);
    }
    std::string name() const override { return "measured"; }

private:
    std::uint64_t seed_;
};

struct TimingRow {
    index_t ncols;
    double density;
    double t_scalar;
    double t_tile;
};

/// Device timings from a CSV with header `ncols,density,t_scalar,t_tile`.
/// A window is matched on exact ncols and the nearest density.
class CsvTimingProvider final : public TimingProvider {
public:
    explicit CsvTimingProvider(std::vector<TimingRow> rows) : rows_(std::move(rows)) {
        detail::require(!rows_.empty(), "timing csv: no rows");
    }

    static CsvTimingProvider from_stream(std::istream& in, const std::string& source) {
        std::string line;
        std::size_t line_no = 0;
        std::vector<TimingRow> rows;
        bool header_seen = false;
        while (std::getline(in, line)) {
            ++line_no;
            auto f = detail::split_fields(line, true);
            if (f.empty()) continue;
            if (!header_seen) {
                if (f.size() != 4 || f[0] != "ncols" || f[1] != "density" || f[2] != "t_scalar" ||
                    f[3] != "t_tile")
                    detail::parse_fail(source, line_no,
                                       "expected header 'ncols,density,t_scalar,t_tile'");
                header_seen = true;
                continue;
            }
            TimingRow r{};
            if (f.size() != 4 || !detail::parse_number(f[0], r.ncols) ||
                !detail::parse_number(f[1], r.density) || !detail::parse_number(f[2], r.t_scalar) ||
                !detail::parse_number(f[3], r.t_tile))
                detail::parse_fail(source, line_no, "malformed timing row");
            rows.push_back(r);
        }
        if (!header_seen) throw InputError(source + ": empty timing csv");
        return CsvTimingProvider(std::move(rows));
    }

    static CsvTimingProvider from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open timing csv '" + path + "'");
        return from_stream(in, path);
    }

    PathTimes measure(const RowWindow<double>& w, index_t, index_t) override {
        const auto f = features(w);
        const TimingRow* best = nullptr;
        for (const auto& r : rows_) {
            if (r.ncols != f.ncols) continue;
            if (!best || std::abs(r.density - f.density) < std::abs(best->density - f.density))
                best = &r;
        }
        detail::require(best != nullptr,
                        "timing csv: no row with ncols=" + std::to_string(f.ncols));
        return {best->t_scalar, best->t_tile};
    }
    std::string name() const override { return "csv"; }
    bool deterministic() const override { return true; }

private:
    std::vector<TimingRow> rows_;
};

}  // namespace hcspmm

#endif
